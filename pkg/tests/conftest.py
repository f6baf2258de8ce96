import pytest

from vsdl.channel import ChannelParams, default_topology, generate_dataset
from vsdl.config import TrainConfig

TINY_TRAIN = TrainConfig(latent_dim=4, hidden=(16,), stage1_epochs=1, stage2_epochs=1, baseline_epochs=1)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(default_topology(), ChannelParams(), 3, seed=11)

ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    """Log one acceptance line and fail the calling test when ``ok`` is false."""
    ACCEPTANCE.append((criterion, bool(ok), detail))
    assert ok, f"{criterion}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
