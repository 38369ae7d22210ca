"""Stationary distribution of the pyramid generator.

The primary path is matrix-geometric: with ``R = C (-A)^{-1}`` and
``Rt = Q12 (-A)^{-1}``, level ``k >= 2`` carries ``pi_k = pi_1 Rt R^{k-2}``,
so the infinite tail is summed in closed form through ``N = (I - R)^{-1}``.
Only the root, level 0 and level 1 need a finite linear solve.

``dense_oracle`` solves the lumped dense generator by a generic linear
solve and exists to cross-check the primary path.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    NegativeProbability,
    SingularBoundarySystem,
    SingularSystem,
    SpectralRadiusAtLeastOne,
)
from .generator import DenseLayout, PyramidGenerator, assemble_dense, invert_upper_bidiagonal
from .model import TruncationConfig

__all__ = [
    "RateMatrices",
    "PyramidStationary",
    "compute_rate_matrices",
    "solve_boundary",
    "stationary",
    "dense_oracle",
    "spectral_radius",
    "boundary_matrix",
]

log = logging.getLogger(__name__)

CLAMP_TOL = 1e-12


def spectral_radius(M: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Spectral radius of a nonnegative matrix by power iteration.

    Falls back to a full eigenvalue computation if the iteration does not
    settle (for example when the dominant eigenvalue is not unique in
    modulus).
    """
    n = M.shape[0]
    if not np.any(M):
        return 0.0
    x = np.full(n, 1.0 / n)
    est = 0.0
    for _ in range(max_iter):
        y = x @ M
        s = y.sum()
        if s == 0.0:
            return 0.0
        y /= s
        if abs(s - est) <= tol * max(s, 1.0) and np.max(np.abs(y - x)) <= tol:
            return float(s)
        x, est = y, s
    log.debug("power iteration did not converge; using eigenvalues")
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _neg_inverse_bidiagonal(M: np.ndarray) -> np.ndarray:
    """``(-M)^{-1}`` for upper-bidiagonal ``M`` via the closed-form inverse."""
    return invert_upper_bidiagonal(-np.diag(M), -np.diag(M, 1))


@dataclass(frozen=True)
class RateMatrices:
    """``R``, ``Rt`` and the Neumann sum ``N = (I - R)^{-1}``."""

    R: np.ndarray
    R_tilde: np.ndarray
    neumann: np.ndarray
    spectral_radius: float


def compute_rate_matrices(gen: PyramidGenerator) -> RateMatrices:
    inv_A = _neg_inverse_bidiagonal(gen.A)
    R = gen.C @ inv_A
    R_tilde = gen.q12 @ inv_A
    sr = spectral_radius(R)
    if not sr < 1.0:
        raise SpectralRadiusAtLeastOne(f"spectral radius of R is {sr:.6g}")
    eye = np.eye(R.shape[0])
    N = np.linalg.inv(eye - R)
    err = np.max(np.abs((eye - R) @ N - eye))
    if err > 1e-10:
        raise SpectralRadiusAtLeastOne(f"(I - R) is ill-conditioned: |(I-R)N - I| = {err:.3g}")
    return RateMatrices(R=R, R_tilde=R_tilde, neumann=N, spectral_radius=sr)


def boundary_matrix(gen: PyramidGenerator, rm: RateMatrices) -> tuple[np.ndarray, np.ndarray]:
    """Censored generator on (root, level 1) and its normalization vector.

    Returns ``(M, w)`` such that ``(pi_root, pi_1) M = 0`` and
    ``(pi_root, pi_1) . w = 1``.
    """
    inv_q00 = _neg_inverse_bidiagonal(gen.q00)
    via0 = gen.q_root_0 @ inv_q00
    tail = rm.R_tilde @ rm.neumann
    n1 = gen.q11.shape[0]
    M = np.zeros((1 + n1, 1 + n1))
    M[0, 0] = gen.q_root_root + via0 @ gen.q_0_root
    M[0, 1:] = gen.q_root_1 + via0 @ gen.q01
    M[1:, 0] = gen.q_1_root + tail @ gen.B
    M[1:, 1:] = gen.q11
    w = np.empty(1 + n1)
    w[0] = 1.0 + via0.sum()
    w[1:] = 1.0 + tail.sum(axis=1)
    return M, w


def _clamp(x: np.ndarray, what: str) -> np.ndarray:
    if np.any(x < -CLAMP_TOL):
        raise NegativeProbability(f"{what} has entry {x.min():.3g}")
    return np.where(x < 0.0, 0.0, x)


def solve_boundary(gen: PyramidGenerator, rm: RateMatrices) -> tuple[float, np.ndarray, np.ndarray]:
    """Solve for ``(pi_root, pi_0, pi_1)``.

    One balance equation is redundant; its column is replaced by the
    normalization condition.
    """
    M, w = boundary_matrix(gen, rm)
    system = M.copy()
    system[:, 0] = w
    rhs = np.zeros(M.shape[0])
    rhs[0] = 1.0
    try:
        x = np.linalg.solve(system.T, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularBoundarySystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularBoundarySystem("boundary solution is not finite")
    resid = np.max(np.abs(x @ M))
    if resid > 1e-10 * max(1.0, np.max(np.abs(M))):
        raise SingularBoundarySystem(f"boundary residual {resid:.3g}")
    x = _clamp(x, "boundary vector")
    pi_root = float(x[0])
    pi1 = x[1:]
    pi0 = _clamp(pi_root * (gen.q_root_0 @ _neg_inverse_bidiagonal(gen.q00)), "level-0 vector")
    return pi_root, pi0, pi1


@dataclass(frozen=True)
class PyramidStationary:
    """Stationary vector in matrix-geometric form.

    ``level(k)`` materializes ``pi_k``; tail sums use the Neumann series
    and are exact.
    """

    gen: PyramidGenerator
    rates: RateMatrices
    pi_root: float
    pi0: np.ndarray
    pi1: np.ndarray

    @property
    def R(self) -> np.ndarray:
        return self.rates.R

    @property
    def R_tilde(self) -> np.ndarray:
        return self.rates.R_tilde

    @cached_property
    def pi2(self) -> np.ndarray:
        return self.pi1 @ self.rates.R_tilde

    def level(self, k: int) -> np.ndarray:
        """Probability vector of level ``k`` over its phases."""
        if k == 0:
            return self.pi0
        if k == 1:
            return self.pi1
        if k < 0:
            raise ValueError(f"negative level {k}")
        return self.pi2 @ np.linalg.matrix_power(self.rates.R, k - 2)

    def levels(self, upto: int) -> list[np.ndarray]:
        """``[pi_0, ..., pi_upto]`` by repeated multiplication."""
        out = [self.pi0, self.pi1]
        v = self.pi2
        for _ in range(2, upto + 1):
            out.append(v)
            v = v @ self.rates.R
        return out[: upto + 1]

    def tail_sum(self, from_level: int = 2) -> np.ndarray:
        """``sum_{k >= from_level} pi_k`` as a phase vector (``from_level >= 2``)."""
        if from_level < 2:
            raise ValueError("tail sums start at level 2")
        start = self.pi2 @ np.linalg.matrix_power(self.rates.R, from_level - 2)
        return start @ self.rates.neumann

    @cached_property
    def level_weighted_tail(self) -> np.ndarray:
        """``sum_{k >= 2} k pi_k`` as a phase vector, via ``N + N^2``."""
        N = self.rates.neumann
        return self.pi2 @ (N + N @ N)

    @cached_property
    def total_mass(self) -> float:
        return float(self.pi_root + self.pi0.sum() + self.pi1.sum() + self.tail_sum(2).sum())

    def tail_mass(self, from_level: int) -> float:
        return float(self.tail_sum(from_level).sum())

    def levels_for_mass(self, tol: float) -> int:
        """Smallest ``L >= 2`` with mass above level ``L`` at most ``tol``."""
        v = self.pi2
        N = self.rates.neumann
        k = 2
        while float((v @ self.rates.R @ N).sum()) > tol:
            v = v @ self.rates.R
            k += 1
            if k > 1_000_000:
                raise SpectralRadiusAtLeastOne("tail does not decay")
        return k

    def to_dense(self, layout: DenseLayout) -> np.ndarray:
        """Flatten onto ``layout``; the last level holds the lumped tail."""
        L = layout.max_level
        x = np.empty(layout.size)
        x[0] = self.pi_root
        for k, v in enumerate(self.levels(L - 1)):
            off = layout.offset(k)
            x[off:off + v.size] = v
        off = layout.offset(L)
        x[off:] = self.tail_sum(L)
        return x

    def rows(self, upto: int):
        """Yield ``(level, lead, probability)`` with the root first."""
        yield 0, 0, self.pi_root
        lay = self.gen.layout
        for k, v in enumerate(self.levels(upto)):
            for lead, p in zip(lay.leads(k), v):
                yield k, int(lead), float(p)


def stationary(gen: PyramidGenerator) -> PyramidStationary:
    """Matrix-geometric stationary distribution of ``gen``."""
    rm = compute_rate_matrices(gen)
    pi_root, pi0, pi1 = solve_boundary(gen, rm)
    st = PyramidStationary(gen=gen, rates=rm, pi_root=pi_root, pi0=pi0, pi1=pi1)
    mass = st.total_mass
    if abs(mass - 1.0) > 1e-10:
        # only reachable after clamping tiny negatives
        st = PyramidStationary(gen=gen, rates=rm, pi_root=pi_root / mass, pi0=pi0 / mass, pi1=pi1 / mass)
    if np.any(st.pi2 < -CLAMP_TOL):
        raise NegativeProbability(f"level-2 vector has entry {st.pi2.min():.3g}")
    return st


def null_vector(Q: np.ndarray) -> np.ndarray:
    """Probability vector ``x`` with ``x Q = 0`` by a generic solve.

    The first balance equation is replaced by ``x . e = 1``.

    Examples
    --------
    >>> null_vector(np.array([[-1.0, 1.0], [3.0, -3.0]]))
    array([0.75, 0.25])
    """
    system = Q.T.copy()
    system[0, :] = 1.0
    rhs = np.zeros(Q.shape[0])
    rhs[0] = 1.0
    try:
        x = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("solution is not finite")
    return x


def dense_oracle(gen: PyramidGenerator, trunc: TruncationConfig) -> tuple[np.ndarray, DenseLayout]:
    """Stationary vector of the lumped dense generator."""
    Q, layout = assemble_dense(gen, trunc)
    return null_vector(Q), layout
