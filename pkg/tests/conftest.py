import time

import numpy as np
import pytest

from affine_husimi import AffineSymbol, default_grid, make_log_grid, phase_window, quantize_kernel

# criterion number -> (label, passed, detail, seconds)
ACCEPTANCE = {}


def record(number, label, passed, detail, seconds):
    ACCEPTANCE[number] = (label, bool(passed), detail, seconds)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def acceptance_lines():
    lines = []
    for number in sorted(ACCEPTANCE):
        label, passed, detail, seconds = ACCEPTANCE[number]
        lines.append(f"[{'PASS' if passed else 'FAIL'}] {number:2d} {label}: {detail} ({seconds:.1f} s)")
    return lines


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_lines():
        terminalreporter.write_line(line)


def smooth_symbol_values(a, b):
    return np.exp(-(a + 1 / a)) * np.exp(-(b**2))


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture(scope="session")
def small_grid():
    return make_log_grid(1e-3, 30.0, 512)


@pytest.fixture(scope="session")
def window():
    return phase_window()


@pytest.fixture(scope="session")
def wide_symbol():
    """Smooth separable symbol on a window that holds its tails."""
    ag = make_log_grid(0.02, 50.0, 256)
    b = np.linspace(-12.0, 12.0, 512)
    return AffineSymbol.from_callable(ag, b, smooth_symbol_values)


@pytest.fixture(scope="session")
def wide_operator(wide_symbol, grid):
    return quantize_kernel(wide_symbol, grid, 1.0)


@pytest.fixture(scope="session")
def wide_evaluator(wide_operator):
    from affine_husimi import HusimiEvaluator

    return HusimiEvaluator(wide_operator, 1.0)
