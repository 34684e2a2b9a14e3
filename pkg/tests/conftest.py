import warnings

import pytest

from ramanmem.acceptance import default_config_dir
from ramanmem.config import build_scenario, load_raw, set_param
from ramanmem.protocol import TimingWarning, run_protocol

CONFIGS = default_config_dir()


def scenario(name="broadband", **params):
    raw = load_raw(CONFIGS / f"{name}.ini")
    for path, value in params.items():
        raw = set_param(raw, path.replace("__", "."), value)
    return build_scenario(raw)


def simulate(sc, options=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TimingWarning)
        return run_protocol(sc.physical, sc.geometry, sc.timeline, sc.signal,
                            options or sc.options, sc.c)


@pytest.fixture(scope="session")
def broadband_run():
    sc = scenario(physical__optical_depth=2.0)
    return sc, simulate(sc)


@pytest.fixture(scope="session")
def narrow_run():
    """Default scenario: K u = 3 delta_s, optical depth 2."""
    sc = scenario("default")
    return sc, simulate(sc)
