import numpy as np
import pytest

from brainkernels.data_model import generate_synthetic_cohort


@pytest.fixture(scope="session")
def synth_cohort():
    return generate_synthetic_cohort(seed=1, L=30, K=12, N=200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_cohort(tmp_path, shapes, ados=None):
    """Manifest + headerless CSV matrices with the given (K, N) shapes."""
    rng = np.random.default_rng(0)
    lines = ["subject_id,site,ados,path"]
    for i, (K, N) in enumerate(shapes):
        np.savetxt(tmp_path / f"s{i}.csv", rng.standard_normal((K, N)), delimiter=",")
        score = ados[i] if ados else 3 * i
        lines.append(f"s{i},SITE,{score},s{i}.csv")
    (tmp_path / "manifest.csv").write_text("\n".join(lines) + "\n")
    return tmp_path / "manifest.csv"


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(capsys):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(num, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
