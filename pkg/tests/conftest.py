from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cblasso.measures import AtomicMeasure, FourierOperator, fourier_coefficients  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_instance(fc, seed, s=3, sigma=1 / np.sqrt(2), sep=None):
    """Separated +-1 spikes plus complex Gaussian noise."""
    rng = np.random.default_rng(seed)
    op = FourierOperator(fc)
    sep = 2.0 / op.n if sep is None else sep
    while True:
        t = np.sort(rng.uniform(0, 1, s))
        gaps = np.diff(np.concatenate([t, [t[0] + 1]]))
        if gaps.min() >= sep:
            break
    a = rng.choice([-1.0, 1.0], s).astype(complex)
    mu0 = AtomicMeasure(t, a)
    eps = sigma * (rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n))
    return op, mu0, fourier_coefficients(op, mu0) + eps, eps


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
