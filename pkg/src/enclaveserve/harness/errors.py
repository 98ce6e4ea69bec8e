from __future__ import annotations


class HarnessError(Exception):
    """Base error for the experiment harness."""


class ConfigInvalid(HarnessError):
    pass


class ScenarioFailed(HarnessError):
    pass


class EmptySamples(HarnessError):
    pass


class IoFailure(HarnessError):
    pass
