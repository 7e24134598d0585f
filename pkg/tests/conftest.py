from importlib import resources

import pytest
from hypothesis import settings

from dataflow_cost.dsl import HardwareConfig, parse_model

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def data_text(name: str) -> str:
    return resources.files("dataflow_cost").joinpath("data", name).read_text()


def data_path(name: str) -> str:
    return str(resources.files("dataflow_cost").joinpath("data", name))


@pytest.fixture(scope="session")
def conv1d():
    return {l.name: (l, d) for l, d in parse_model(data_text("conv1d.m"))}


# PE counts the one-dimensional examples are meant to run with
CONV1D_PES = {"unrolled": 3, "A": 3, "B": 3, "C": 2, "D": 2, "E": 2, "F": 6}


def conv1d_hw(name: str, **kw) -> HardwareConfig:
    return HardwareConfig(num_pes=CONV1D_PES[name], **kw)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
