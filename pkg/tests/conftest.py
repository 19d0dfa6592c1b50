import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def pytest_terminal_summary(terminalreporter):
    try:
        from acceptance_report import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def synthetic_csv(tmp_path):
    """A small correlated-subsets dataset written as a labeled CSV."""
    from tabdisent.data import write_csv
    from tabdisent.synthetic import correlated_subsets

    ds = correlated_subsets(n_normal=80, n_anomaly=12, block_sizes=(3, 3), seed=7, name="syn")
    path = tmp_path / "syn.csv"
    write_csv(ds, path)
    return path


@pytest.fixture
def fast_ini(tmp_path, synthetic_csv):
    """An experiment config that trains in well under a second."""
    path = tmp_path / "exp.ini"
    path.write_text(
        "[experiment]\n"
        f"dataset = {synthetic_csv}\n"
        f"output_dir = {tmp_path / 'run'}\n"
        "trials = 2\n"
        "epochs = 4\n"
        "batch_size = 32\n"
        "learning_rate = 1e-3\n"
        "latent_channels = 8\n"
        "normalization = zscore\n"
    )
    return path
