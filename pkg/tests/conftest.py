import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture(params=["cython", "python"])
def backend(request, monkeypatch):
    """Run a test under each composition kernel."""
    from alelab import _kernels_py, kernels

    if request.param == "cython":
        try:
            from alelab import _kernels
        except ImportError:
            pytest.skip("compiled extension not built")
        monkeypatch.setattr(kernels, "compose", _kernels.compose)
    else:
        monkeypatch.setattr(kernels, "compose", _kernels_py.compose)
    return request.param


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES

    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
