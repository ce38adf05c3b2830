import dataclasses

import pytest

from feedback_coverage.config import default_config


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def gentle_cfg(cfg):
    """Logistic in its transition band at typical downlink SNRs.

    Under the shipped coefficients the feedback threshold sits at its floor
    for almost every fade, so per-trial coupling is invisible.  This set
    moves the transition into the 50-80 dB band the downlink actually sees.
    """
    code = dataclasses.replace(cfg.code, u=(0.1, 0.5, 0.01, -3.0, 0.05, -6.0))
    return cfg.replace(code=code)


def write_json(path, payload):
    import json
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path
