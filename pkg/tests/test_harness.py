from __future__ import annotations

import dataclasses
from pathlib import Path

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from enclaveserve.cli import main as cli_main
from enclaveserve.harness import (
    ConfigInvalid,
    EmptySamples,
    WorkloadSpec,
    build_lb_scenario,
    build_scaling_scenario,
    emit_report,
    generate_arrivals,
    load_scenario,
    percentile,
    run_scenario,
    run_scenario_real,
)
from enclaveserve.harness.report import (
    load_latencies,
    render_latencies,
    summarize_dir,
)
from enclaveserve.harness.runner import VirtualRunner
from enclaveserve.harness.scenario import (
    InterferenceSettings,
    WorkloadSettings,
    from_dict,
)
from enclaveserve.profiles import PRESETS


# -- workload ---------------------------------------------------------------------


def test_mean_gap_is_inverse_rate():
    spec = WorkloadSpec("svc", rate_per_s=50.0, duration_s=400.0, rng_seed=3)
    arrivals = generate_arrivals(spec)
    gaps = [b - a for a, b in zip(arrivals, arrivals[1:])]
    assert len(gaps) > 10_000
    mean_gap = sum(gaps) / len(gaps)
    assert mean_gap == pytest.approx(1 / 50.0, rel=0.05)


def test_same_seed_identical_stream():
    spec = WorkloadSpec("svc", rate_per_s=100.0, duration_s=10.0, rng_seed=9)
    assert generate_arrivals(spec) == generate_arrivals(spec)


def test_different_seed_different_stream():
    a = WorkloadSpec("svc", rate_per_s=100.0, duration_s=10.0, rng_seed=1)
    b = WorkloadSpec("svc", rate_per_s=100.0, duration_s=10.0, rng_seed=2)
    assert generate_arrivals(a) != generate_arrivals(b)


def test_arrivals_inside_duration():
    spec = WorkloadSpec("svc", rate_per_s=20.0, duration_s=5.0, rng_seed=4)
    arrivals = generate_arrivals(spec)
    assert all(0 <= t < 5.0 for t in arrivals)


def test_workload_validation():
    with pytest.raises(ValueError):
        WorkloadSpec("svc", rate_per_s=0.0, duration_s=1.0)
    with pytest.raises(ValueError):
        WorkloadSpec("svc", rate_per_s=1.0, duration_s=0.0)


# -- percentile -------------------------------------------------------------------


def test_percentile_nearest_rank_1_to_100():
    samples = list(range(1, 101))
    assert percentile(samples, 99) == 99
    assert percentile(samples, 100) == 100
    assert percentile(samples, 1) == 1
    assert percentile(samples, 50) == 50


def test_percentile_single_sample():
    assert percentile([7.5], 99) == 7.5
    assert percentile([7.5], 1) == 7.5


def test_percentile_all_equal():
    assert percentile([3.0] * 17, 95) == 3.0


def test_percentile_empty():
    with pytest.raises(EmptySamples):
        percentile([], 99)


def test_percentile_range_check():
    with pytest.raises(ValueError):
        percentile([1.0], 0)
    with pytest.raises(ValueError):
        percentile([1.0], 101)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50), st.floats(0.01, 100))
def test_percentile_is_a_sample_and_monotone(samples, p):
    value = percentile(samples, p)
    assert value in samples
    assert percentile(samples, 100) == max(samples)


# -- scenario config ----------------------------------------------------------------


def test_builder_configs_validate():
    config = build_lb_scenario("mobilenet_v1_float", "sgx_aware", "high")
    assert config.slo is not None
    assert len(config.replica_placements) == 3
    scaling = build_scaling_scenario("efficientnet_lite_quant", 1)
    assert len(scaling.replica_placements) == 1


def test_yaml_roundtrip(tmp_path):
    raw = {
        "name": "demo",
        "seed": 5,
        "duration_s": 10.0,
        "cluster": {"nodes": [{"id": "n1", "cores": 2}, {"id": "n2"}]},
        "aecs": {"replicas": [{"id": "a0", "node": "n1"}]},
        "service": {
            "id": "svc",
            "model": "mobilenet_v1_float",
            "algorithm": "rr",
            "replicas": [{"id": "r0", "node": "n1"}],
        },
        "workload": {"rate_per_s": 10.0},
    }
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(raw))
    config = load_scenario(path)
    assert config.name == "demo"
    assert config.seed == 5
    assert config.nodes[1].cores == 2


@pytest.mark.parametrize(
    "mutate,message",
    [
        (lambda raw: raw["service"].update(algorithm="fancy"), "algorithm"),
        (lambda raw: raw["service"].update(model="resnet152"), "model"),
        (lambda raw: raw["service"]["replicas"].append({"id": "r9", "node": "ghost"}), "node"),
        (lambda raw: raw.update(duration_s=-1), "duration"),
        (lambda raw: raw.pop("workload"), "workload"),
    ],
)
def test_config_invalid_cases(mutate, message):
    raw = {
        "name": "demo",
        "duration_s": 10.0,
        "cluster": {"nodes": [{"id": "n1"}]},
        "aecs": {"replicas": [{"id": "a0", "node": "n1"}]},
        "service": {
            "id": "svc",
            "model": "mobilenet_v1_float",
            "algorithm": "rr",
            "replicas": [{"id": "r0", "node": "n1"}],
        },
        "workload": {"rate_per_s": 10.0},
    }
    mutate(raw)
    with pytest.raises(ConfigInvalid):
        from_dict(raw)


def test_interference_windows_must_not_overlap():
    config = build_lb_scenario("mobilenet_v1_float", "rr", "none")
    bad = dataclasses.replace(
        config,
        interference=(
            InterferenceSettings("node-a", ((5.0, 20.0), (15.0, 30.0)), 93, 1000.0),
        ),
    )
    from enclaveserve.harness.scenario import validate

    with pytest.raises(ConfigInvalid):
        validate(bad)


def test_sgx_aware_requires_slo_policy():
    config = build_lb_scenario("mobilenet_v1_float", "sgx_aware", "none")
    from enclaveserve.harness.scenario import validate

    with pytest.raises(ConfigInvalid):
        validate(dataclasses.replace(config, slo=None))


# -- small end-to-end runs ---------------------------------------------------------------


def small_scenario(algorithm="sed", interference="none", duration=8.0, rate=40.0, seed=1):
    config = build_lb_scenario("mobilenet_v1_float", algorithm, interference, seed=seed)
    scripts = ()
    if config.interference:
        scripts = (dataclasses.replace(config.interference[0], windows=((2.0, 4.0),)),)
    return dataclasses.replace(
        config, duration_s=duration, workload=WorkloadSettings(rate_per_s=rate),
        interference=scripts,
    )


def test_quiet_run_meets_slo_and_conserves_requests():
    report = run_scenario(small_scenario())
    assert report.sent == report.completed + report.timed_out + report.rejected + report.in_flight_at_cutoff
    assert report.in_flight_at_cutoff == 0
    assert report.rejected == 0
    assert report.slo_met


@pytest.mark.parametrize("model", sorted(PRESETS))
def test_single_replica_far_below_capacity_meets_slo(model):
    config = build_scaling_scenario(model, 1, seed=6)
    config = dataclasses.replace(
        config,
        duration_s=20.0,
        workload=WorkloadSettings(rate_per_s=0.1 * config.parallelism / config.profile.base_time_s),
    )
    report = run_scenario(config)
    assert report.slo_met
    assert report.timed_out == 0


def test_open_loop_send_times_match_generated_arrivals():
    config = small_scenario()
    report = run_scenario(config)
    spec = WorkloadSpec(
        service_id=config.service_id,
        rate_per_s=config.workload.rate_per_s,
        duration_s=config.duration_s,
        rng_seed=config.seed,
        payload_bytes=config.workload.payload_bytes,
        timeout_s=config.workload.timeout_s,
    )
    assert [r.send_ts for r in report.records] == generate_arrivals(spec)


def test_connection_counters_drain_to_zero():
    runner = VirtualRunner(small_scenario(interference="high"))
    runner.run()
    assert runner.vs is not None
    for endpoint in runner.vs.endpoints():
        assert endpoint.active_connections == 0
        assert endpoint.replica.active_connections == 0


def test_rr_under_heavy_interference_times_out_and_conserves():
    config = small_scenario(algorithm="rr", interference="high", duration=12.0, rate=60.0)
    config = dataclasses.replace(
        config,
        interference=(dataclasses.replace(config.interference[0], windows=((2.0, 10.0),)),),
        workload=WorkloadSettings(rate_per_s=60.0, timeout_s=3.0),
    )
    report = run_scenario(config)
    assert report.timed_out > 0
    assert report.sent == report.completed + report.timed_out + report.rejected + report.in_flight_at_cutoff


def test_sgx_aware_quiescent_without_interference():
    report = run_scenario(small_scenario(algorithm="sgx_aware", interference="none"))
    assert report.weight_events == []
    assert report.slo_met


def test_sgx_aware_run_logs_weight_events():
    config = small_scenario(algorithm="sgx_aware", interference="high", duration=12.0)
    config = dataclasses.replace(
        config,
        interference=(dataclasses.replace(config.interference[0], windows=((1.0, 9.0),)),),
    )
    report = run_scenario(config)
    kinds = [(e.endpoint_id, e.new) for e in report.weight_events]
    assert ("r0", 0) in kinds and ("r0", 1) in kinds


def test_autoscale_scenario_reaches_target_band():
    # start from one replica of a three-slot pool and let utilization grow it
    from enclaveserve.harness.scenario import AutoscaleSettings

    config = build_scaling_scenario("mobilenet_v1_float", 3, seed=3)
    config = dataclasses.replace(
        config,
        duration_s=30.0,
        parallelism=2,
        autoscale=AutoscaleSettings(
            enabled=True, target_utilization=0.5, min_replicas=1, max_replicas=3, cooldown_s=3.0
        ),
        workload=WorkloadSettings(rate_per_s=150.0),
    )
    runner = VirtualRunner(config)
    runner.run()
    assert runner.vs is not None
    assert len(runner.vs.endpoints()) == 3  # 150 rps of 20 ms work needs 3 pairs of cores


# -- report emission ---------------------------------------------------------------------


def test_emit_is_deterministic_per_report(tmp_path):
    report = run_scenario(small_scenario(seed=11))
    first = emit_report(report, tmp_path / "a")
    second = emit_report(report, tmp_path / "b")
    for key in first:
        assert first[key].read_bytes() == second[key].read_bytes()


def test_summary_p99_matches_recomputation_from_csv(tmp_path):
    report = run_scenario(small_scenario(seed=12))
    emit_report(report, tmp_path)
    rows = load_latencies(tmp_path)
    recomputed = percentile([lat for lat, _ in rows], 99)
    summary = (tmp_path / "summary.txt").read_text()
    assert f"p99_s={recomputed!r}" in summary


def test_weights_csv_row_count_matches_actuations(tmp_path):
    config = small_scenario(algorithm="sgx_aware", interference="high", duration=12.0)
    config = dataclasses.replace(
        config,
        interference=(dataclasses.replace(config.interference[0], windows=((1.0, 9.0),)),),
    )
    report = run_scenario(config)
    emit_report(report, tmp_path)
    lines = (tmp_path / "weights.csv").read_text().splitlines()
    assert len(lines) - 1 == len(report.weight_events)


def test_latencies_render_parses_back():
    report = run_scenario(small_scenario(seed=13))
    text = render_latencies(report)
    assert text.startswith("send_ts,complete_ts,endpoint,latency,status\n")
    assert len(text.splitlines()) == len(report.records) + 1


def test_summarize_dir(tmp_path):
    report = run_scenario(small_scenario(seed=14))
    emit_report(report, tmp_path)
    text = summarize_dir(tmp_path)
    assert f"records={len(report.records)}" in text


# -- CLI ----------------------------------------------------------------------------------


def scenario_yaml(tmp_path) -> Path:
    raw = {
        "name": "cli-demo",
        "seed": 2,
        "duration_s": 5.0,
        "cluster": {"nodes": [{"id": "n1", "cores": 2}, {"id": "n2", "cores": 2}]},
        "aecs": {"replicas": [{"id": "a0", "node": "n2"}]},
        "service": {
            "id": "svc",
            "model": "mobilenet_v1_float",
            "algorithm": "sed",
            "replicas": [{"id": "r0", "node": "n1"}, {"id": "r1", "node": "n2"}],
        },
        "workload": {"rate_per_s": 30.0},
    }
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def test_cli_run_writes_artifacts(tmp_path, capsys):
    path = scenario_yaml(tmp_path)
    out = tmp_path / "out"
    assert cli_main(["run", str(path), "--out", str(out)]) == 0
    for name in ("latencies.csv", "weights.csv", "epc.csv", "service.csv", "summary.txt"):
        assert (out / name).exists()
    assert "p99_s=" in capsys.readouterr().out


def test_cli_seed_override_is_deterministic(tmp_path, capsys):
    path = scenario_yaml(tmp_path)
    assert cli_main(["run", str(path), "--seed", "123"]) == 0
    first = capsys.readouterr().out
    assert cli_main(["run", str(path), "--seed", "123"]) == 0
    assert capsys.readouterr().out == first


def test_cli_report_roundtrip(tmp_path, capsys):
    path = scenario_yaml(tmp_path)
    out = tmp_path / "out"
    cli_main(["run", str(path), "--out", str(out)])
    capsys.readouterr()
    assert cli_main(["report", str(out)]) == 0
    assert "p99_s=" in capsys.readouterr().out


def test_cli_profile(tmp_path, capsys):
    assert cli_main(["profile", "mobilenet_v1_float", "--slo", "100", "--out", str(tmp_path)]) == 0
    output = capsys.readouterr().out
    assert "boundary_pages_per_s=" in output
    assert (tmp_path / "profile-mobilenet_v1_float.csv").exists()


def test_cli_rejects_invalid_scenario(tmp_path, capsys):
    path = tmp_path / "broken.yaml"
    path.write_text("just a string")
    assert cli_main(["run", str(path)]) == 1
    assert "error:" in capsys.readouterr().err


# -- real-clock smoke -----------------------------------------------------------------------


def test_real_clock_smoke():
    config = small_scenario(duration=1.5, rate=12.0, seed=21)
    config = dataclasses.replace(
        config, workload=WorkloadSettings(rate_per_s=12.0, timeout_s=5.0)
    )
    report = run_scenario_real(config)
    assert report.sent > 0
    assert report.completed > 0
    assert (
        report.sent
        == report.completed + report.timed_out + report.rejected + report.in_flight_at_cutoff
    )
    ok_latencies = [r.latency for r in report.records if r.status == "ok"]
    # base 20 ms plus scheduler jitter; a sleeping-clock run stays well under a second
    assert all(0.018 <= lat < 2.0 for lat in ok_latencies)
