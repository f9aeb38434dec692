import numpy as np
import pytest

from stylusnorm.dataio import Signature, SyntheticConfig, synth_database


@pytest.fixture(scope="session")
def seed7_db():
    """The frozen 50-user synthetic database used by the scenario checks."""
    return synth_database(SyntheticConfig(n_users=50, n_train=5, n_test=5, seed=7))


@pytest.fixture(scope="session")
def small_db():
    return synth_database(SyntheticConfig(n_users=6, n_train=3, n_test=2, n_samples_mean=120, seed=3))


def make_sig(pressure, user="u0", session="s0", xy=None):
    """Signature with a given pressure track and simple other channels."""
    p = np.asarray(pressure, dtype=float)
    n = p.size
    feats = np.zeros((n, 5))
    feats[:, 0] = np.linspace(1000, 2000, n) if xy is None else xy[:, 0]
    feats[:, 1] = np.linspace(3000, 3500, n) if xy is None else xy[:, 1]
    feats[:, 2] = p
    feats[:, 3] = 1800.0
    feats[:, 4] = 600.0
    return Signature(user, session, np.arange(n, dtype=float), feats)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.REPORT, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)
