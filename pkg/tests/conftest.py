from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")

DATA = Path(__file__).resolve().parents[1] / "src" / "motifgrammar" / "data"
FIXTURES = Path(__file__).resolve().parent / "fixtures"
ACRYLATE = "C=CC(=O)O"


@pytest.fixture
def corpus50():
    from motifgrammar.molecule import read_smiles_file

    return read_smiles_file(DATA / "corpus50.smi")


@pytest.fixture
def acrylates():
    from motifgrammar.molecule import read_smiles_file

    return read_smiles_file(DATA / "acrylates.smi")


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
