"""Atomic measures on the torus and the low-pass Fourier sampling operator.

Coefficient vectors are plain complex numpy arrays indexed by frequency
``k = -fc, ..., fc`` in ascending order. Torus points are floats reduced
modulo 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .trig import TrigPoly

#: positions closer than this (torus distance) are merged at construction
MERGE_TOL = 1e-12


def canonicalize(t: ArrayLike) -> NDArray[np.float64]:
    """Reduce positions modulo 1 into ``[0, 1)``."""
    t = np.mod(np.asarray(t, dtype=float), 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(t >= 1.0, 0.0, t)


def torus_distance(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64] | float:
    """Canonical distance ``min(|a - b|, 1 - |a - b|)`` on ``R/Z``.

    Broadcasts like numpy; scalar inputs give a Python float.
    """
    d = np.abs(canonicalize(a) - canonicalize(b))
    d = np.minimum(d, 1.0 - d)
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely supported complex measure ``sum_j a_j delta_{t_j}``.

    Positions are canonicalized to ``[0, 1)`` and sorted; atoms closer
    than :data:`MERGE_TOL` are merged by summing their amplitudes.
    """

    positions: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    amplitudes: NDArray[np.complex128] = field(default_factory=lambda: np.zeros(0, complex))

    def __post_init__(self):
        t = canonicalize(np.atleast_1d(self.positions)).ravel()
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex)).ravel()
        if t.shape != a.shape:
            raise ValueError(f"got {t.size} positions but {a.size} amplitudes")
        order = np.argsort(t, kind="stable")
        t, a = t[order], a[order]
        if t.size > 1:
            keep_t, keep_a = [t[0]], [a[0]]
            for tj, aj in zip(t[1:], a[1:]):
                if torus_distance(tj, keep_t[-1]) < MERGE_TOL:
                    keep_a[-1] += aj
                else:
                    keep_t.append(tj)
                    keep_a.append(aj)
            # wrap-around duplicate (e.g. 0 and 1 - 1e-15)
            if len(keep_t) > 1 and torus_distance(keep_t[0], keep_t[-1]) < MERGE_TOL:
                keep_a[0] += keep_a.pop()
                keep_t.pop()
            t, a = np.array(keep_t), np.array(keep_a, dtype=complex)
        t.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "positions", t)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def empty(cls) -> AtomicMeasure:
        return cls(np.zeros(0), np.zeros(0, complex))

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, complex]]) -> AtomicMeasure:
        atoms = list(atoms)
        if not atoms:
            return cls.empty()
        t, a = zip(*atoms)
        return cls(np.array(t, dtype=float), np.array(a, dtype=complex))

    @property
    def size(self) -> int:
        return int(self.positions.size)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return bool(
            np.array_equal(self.positions, other.positions)
            and np.array_equal(self.amplitudes, other.amplitudes)
        )

    __hash__ = None

    def __add__(self, other: AtomicMeasure) -> AtomicMeasure:
        return AtomicMeasure(
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.amplitudes, other.amplitudes]),
        )

    def __neg__(self) -> AtomicMeasure:
        return AtomicMeasure(self.positions, -self.amplitudes)

    def __sub__(self, other: AtomicMeasure) -> AtomicMeasure:
        return self + (-other)

    def scale(self, factor: complex) -> AtomicMeasure:
        return AtomicMeasure(self.positions, factor * self.amplitudes)

    def tv_norm(self) -> float:
        return tv_norm(self)

    def to_json(self) -> dict:
        return {
            "atoms": [
                {"t": float(t), "re": float(a.real), "im": float(a.imag)}
                for t, a in zip(self.positions, self.amplitudes)
            ]
        }

    @classmethod
    def from_json(cls, data: dict) -> AtomicMeasure:
        return cls.from_atoms((d["t"], complex(d["re"], d["im"])) for d in data["atoms"])


def tv_norm(mu: AtomicMeasure) -> float:
    """Total variation norm of an atomic measure: the sum of amplitude moduli."""
    return float(np.abs(mu.amplitudes).sum())


@dataclass(frozen=True)
class FourierOperator:
    """Sampling operator returning the ``n = 2 fc + 1`` lowest Fourier coefficients."""

    fc: int

    def __post_init__(self):
        if int(self.fc) != self.fc or self.fc < 1:
            raise ValueError(f"cutoff frequency must be a positive integer, got {self.fc!r}")
        object.__setattr__(self, "fc", int(self.fc))

    @classmethod
    def from_size(cls, n: int) -> FourierOperator:
        if n % 2 != 1 or n < 3:
            raise ValueError(f"number of coefficients must be odd and >= 3, got {n}")
        return cls((n - 1) // 2)

    @property
    def n(self) -> int:
        return 2 * self.fc + 1

    @property
    def frequencies(self) -> NDArray[np.int64]:
        return np.arange(-self.fc, self.fc + 1)

    def design(self, positions: ArrayLike) -> NDArray[np.complex128]:
        """Matrix ``X[k, j] = exp(-2i pi k t_j)`` mapping amplitudes to coefficients."""
        t = np.atleast_1d(np.asarray(positions, dtype=float))
        return np.exp(-2j * np.pi * np.outer(self.frequencies, t))

    def __call__(self, mu: AtomicMeasure) -> NDArray[np.complex128]:
        return fourier_coefficients(self, mu)

    def adjoint(self, c: ArrayLike) -> TrigPoly:
        return adjoint_polynomial(self, c)


def fourier_coefficients(op: FourierOperator, mu: AtomicMeasure) -> NDArray[np.complex128]:
    r"""Coefficients ``c_k(mu) = \sum_j a_j exp(-2i pi k t_j)`` for ``|k| <= fc``."""
    if mu.size == 0:
        return np.zeros(op.n, dtype=complex)
    return op.design(mu.positions) @ mu.amplitudes


def adjoint_polynomial(op: FourierOperator, c: ArrayLike) -> TrigPoly:
    """The trigonometric polynomial ``t -> sum_k c_k exp(2i pi k t)``."""
    c = np.asarray(c, dtype=complex)
    if c.shape != (op.n,):
        raise ValueError(f"expected a coefficient vector of length {op.n}, got shape {c.shape}")
    return TrigPoly(c)


def dirichlet_value(op: FourierOperator, t: ArrayLike) -> NDArray[np.float64] | float:
    """Dirichlet kernel ``1 + 2 sum_{k=1}^{fc} cos(2 pi k t)``; equals ``n`` at 0."""
    t = np.asarray(t, dtype=float)
    s = np.sin(np.pi * t)
    # n is odd, so the kernel tends to n at every integer
    out = np.full(t.shape, float(op.n))
    np.divide(np.sin(np.pi * op.n * t), s, out=out, where=np.abs(s) > 1e-8)
    return float(out) if out.ndim == 0 else out


def vector_to_json(c: ArrayLike) -> dict:
    """Serialize a coefficient vector (ascending ``k``) as ``{"fc", "entries"}``."""
    c = np.asarray(c, dtype=complex)
    if c.ndim != 1 or c.size % 2 != 1:
        raise ValueError("coefficient vectors have odd length")
    return {"fc": (c.size - 1) // 2, "entries": [[float(z.real), float(z.imag)] for z in c]}


def vector_from_json(data: dict) -> NDArray[np.complex128]:
    entries = np.asarray(data["entries"], dtype=float).reshape(-1, 2)
    c = entries[:, 0] + 1j * entries[:, 1]
    if c.size != 2 * int(data["fc"]) + 1:
        raise ValueError(f"fc={data['fc']} requires {2 * int(data['fc']) + 1} entries, got {c.size}")
    return c
