import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fairsched.exact import ExactInstance  # noqa: E402
from fairsched.io import load_config  # noqa: E402
from fairsched.model import EnergyConstants  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
ENERGY_LIMITED = ROOT / "configs" / "nop_energy_limited.yaml"


def energy_limited(**overrides):
    cfg, _ = load_config(ENERGY_LIMITED)
    for key, value in overrides.items():
        if key == "seed":
            cfg.scenario.seed = value
        elif key == "n":
            cfg.scenario.n = value
        elif key == "kappa":
            cfg.kappa = value
        else:
            raise KeyError(key)
    return cfg


def tiny_instance(rng, budget=64, ample=True):
    """Random instance with n, s, f_max <= 3 and payload <= 4 packets.

    Link quality is constant per node across frames. With ``ample`` every
    node can afford the access cost and a full frame of packets in every
    frame of the horizon, scaled by a random factor in [1, 3].
    """
    c = EnergyConstants()
    n, s, F = (int(v) for v in rng.integers(1, 4, 3))
    payload = rng.integers(1, 5, n).astype(float)
    q = np.repeat(np.round(rng.uniform(0.05, 1.0, (n, 1)), 3), F, axis=1)
    per_frame = c.e_rcap + s * c.e_tx
    if ample:
        e0 = c.e_td + F * per_frame * rng.uniform(1.0, 3.0, n)
    else:
        e0 = c.e_td + F * per_frame * rng.uniform(0.2, 1.2, n)
    harvest = rng.uniform(0.0, 0.05e-3, (n, F))
    kappa = float(np.round(rng.uniform(0.05, 1.0), 3))
    return ExactInstance(n=n, s=s, f_max=F, payload=payload, e0=e0, q=q,
                         harvest=harvest, kappa=kappa, budget=budget)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
