"""Block structure of the pyramid generator.

States are ``(level, lead)`` pairs: ``level`` counts honest blocks in the
current fork and ``lead`` is dishonest minus honest blocks.  The root state
``(0, 0)`` is the fork-free state.  Phases per level are

* level 0: leads ``1..K``
* level 1: leads ``-1..K``
* level k >= 2: leads ``-2..K``

so the root never collides with a level-0 phase.  Transitions:

* dishonest mining (rate ``a``) raises the lead by one,
* honest mining (rate ``b``) raises the level by one and lowers the lead,
* at lead ``-2`` the honest branch pegs at rate ``mu`` (back to the root)
  while dishonest mining continues,
* at lead ``l >= 2`` the dishonest branch pegs at rate ``mu * p_l`` and
  mines on at rate ``a * (1 - p_l)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ZeroDiagonal
from .model import DerivedRates, ModelParams, TruncationConfig, derive_rates

__all__ = [
    "PhaseLayout",
    "PyramidGenerator",
    "DenseLayout",
    "build_generator",
    "invert_upper_bidiagonal",
    "assemble_dense",
]


@dataclass(frozen=True)
class PhaseLayout:
    """Bijection between leads and flat phase indices within each level."""

    cutoff: int

    def min_lead(self, level: int) -> int:
        if level < 0:
            raise ValueError(f"negative level {level}")
        return (1, -1)[level] if level < 2 else -2

    def leads(self, level: int) -> np.ndarray:
        return np.arange(self.min_lead(level), self.cutoff + 1)

    def size(self, level: int) -> int:
        return self.cutoff - self.min_lead(level) + 1

    def index(self, level: int, lead: int) -> int:
        lo = self.min_lead(level)
        if not lo <= lead <= self.cutoff:
            raise KeyError(f"lead {lead} not a phase of level {level}")
        return lead - lo

    def lead(self, level: int, index: int) -> int:
        if not 0 <= index < self.size(level):
            raise KeyError(f"index {index} out of range for level {level}")
        return self.min_lead(level) + index


def _level_block(leads: np.ndarray, rates: DerivedRates) -> tuple[np.ndarray, np.ndarray]:
    """Within-level block and its exit column to the root.

    Returns the upper-bidiagonal diagonal block for one level together with
    the vector of rates back to the root state.
    """
    a, b, mu = rates.a, rates.b, rates.mu
    n = len(leads)
    block = np.zeros((n, n))
    to_root = np.zeros(n)
    for i, lead in enumerate(leads):
        if lead == -2:
            block[i, i] = -(a + mu)
            block[i, i + 1] = a
            to_root[i] = mu
        elif lead <= 1:
            block[i, i] = -(a + b)
            block[i, i + 1] = a
        else:
            p = rates.detain.prob(int(lead))
            block[i, i] = -rates.xi(int(lead))
            if i + 1 < n:
                block[i, i + 1] = a * (1.0 - p)
            to_root[i] = mu * p
    return block, to_root


@dataclass(frozen=True)
class PyramidGenerator:
    """Block matrices of the pyramid generator.

    Names follow the block positions: ``q00`` is level 0 to level 0,
    ``q01`` level 0 to level 1, ``q_root_0`` root to level 0, and so on.
    ``A``, ``B``, ``C`` are the repeating blocks for levels ``k >= 2``
    (within level, to root, to level ``k + 1``).
    """

    rates: DerivedRates
    layout: PhaseLayout
    q_root_root: float
    q_root_0: np.ndarray
    q_root_1: np.ndarray
    q_0_root: np.ndarray
    q00: np.ndarray
    q01: np.ndarray
    q_1_root: np.ndarray
    q11: np.ndarray
    q12: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def cutoff(self) -> int:
        return self.layout.cutoff

    def blocks(self) -> dict[str, np.ndarray]:
        """All blocks by name, the root diagonal as a 1x1 array."""
        return {
            "q_root_root": np.array([[self.q_root_root]]),
            "q_root_0": self.q_root_0[None, :],
            "q_root_1": self.q_root_1[None, :],
            "q_0_root": self.q_0_root[:, None],
            "q00": self.q00,
            "q01": self.q01,
            "q_1_root": self.q_1_root[:, None],
            "q11": self.q11,
            "q12": self.q12,
            "A": self.A,
            "B": self.B[:, None],
            "C": self.C,
        }

    def triples(self) -> Iterator[tuple[str, int, int, float]]:
        """Nonzero entries as ``(block, row, col, value)`` for debug dumps."""
        for name, m in self.blocks().items():
            rows, cols = np.nonzero(m)
            for r, c in zip(rows, cols):
                yield name, int(r), int(c), float(m[r, c])


def build_generator(params: ModelParams) -> PyramidGenerator:
    """Build the generator blocks for ``params``.

    Validation is the caller's job, so limiting cases such as ``b = 0`` can
    be built directly.
    """
    rates = derive_rates(params)
    layout = PhaseLayout(params.detain.cutoff)
    a, b = rates.a, rates.b
    n0, n1, n2 = layout.size(0), layout.size(1), layout.size(2)

    q00, q_0_root = _level_block(layout.leads(0), rates)
    q11, q_1_root = _level_block(layout.leads(1), rates)
    A, B = _level_block(layout.leads(2), rates)

    q_root_0 = np.zeros(n0)
    q_root_0[0] = a
    q_root_1 = np.zeros(n1)
    q_root_1[0] = b

    # honest mining: (i, lead) -> (i + 1, lead - 1)
    q01 = np.zeros((n0, n1))
    q01[np.arange(n0), np.arange(n0) + 1] = b
    q12 = np.zeros((n1, n2))
    q12[np.arange(n1), np.arange(n1)] = b
    C = np.zeros((n2, n2))
    C[np.arange(1, n2), np.arange(n2 - 1)] = b

    return PyramidGenerator(
        rates=rates,
        layout=layout,
        q_root_root=-(a + b),
        q_root_0=q_root_0,
        q_root_1=q_root_1,
        q_0_root=q_0_root,
        q00=q00,
        q01=q01,
        q_1_root=q_1_root,
        q11=q11,
        q12=q12,
        A=A,
        B=B,
        C=C,
    )


def invert_upper_bidiagonal(diag, sup) -> np.ndarray:
    """Closed-form inverse of an upper-bidiagonal matrix.

    Element ``(k, k + l)`` of the inverse is
    ``(-1)**l * f_k ... f_{k+l-1} / (d_k ... d_{k+l})``.

    Parameters
    ----------
    diag : array_like, shape (n,)
        Diagonal ``d``; every entry must be nonzero.
    sup : array_like, shape (n - 1,)
        Superdiagonal ``f``.

    Examples
    --------
    >>> invert_upper_bidiagonal([-2.0, -2.0], [1.0])
    array([[-0.5 , -0.25],
           [ 0.  , -0.5 ]])
    """
    d = np.asarray(diag, dtype=float)
    f = np.asarray(sup, dtype=float)
    n = d.size
    if f.size != max(n - 1, 0):
        raise ValueError(f"superdiagonal must have length {n - 1}, got {f.size}")
    if np.any(d == 0):
        raise ZeroDiagonal(f"zero on the diagonal at positions {np.flatnonzero(d == 0).tolist()}")
    inv = np.zeros((n, n))
    inv[np.arange(n), np.arange(n)] = 1.0 / d
    # fill one superdiagonal at a time: X[k, j+1] = -X[k, j] * f_j / d_{j+1}
    for l in range(1, n):
        k = np.arange(n - l)
        j = k + l
        inv[k, j] = -inv[k, j - 1] * f[j - 1] / d[j]
    return inv


@dataclass(frozen=True)
class DenseLayout:
    """Flat ordering of states for a dense generator over levels ``0..L``.

    The root comes first, then level 0, level 1, ..., level ``L``.  Level
    ``L`` stands for all levels ``>= L``.
    """

    phases: PhaseLayout
    max_level: int

    def offset(self, level: int) -> int:
        """Flat index of the first phase of ``level`` (root is index 0)."""
        if not 0 <= level <= self.max_level:
            raise KeyError(f"level {level} outside 0..{self.max_level}")
        off = 1
        for k in range(level):
            off += self.phases.size(k)
        return off

    @property
    def size(self) -> int:
        return self.offset(self.max_level) + self.phases.size(self.max_level)

    def index(self, level: int, lead: int) -> int:
        if level == 0 and lead == 0:
            return 0
        return self.offset(level) + self.phases.index(level, lead)

    def states(self) -> np.ndarray:
        """``(size, 2)`` integer array of ``(level, lead)`` per flat index."""
        out = [(0, 0)]
        for k in range(self.max_level + 1):
            out.extend((k, int(l)) for l in self.phases.leads(k))
        return np.array(out, dtype=int)


def assemble_dense(gen: PyramidGenerator, trunc: TruncationConfig) -> tuple[np.ndarray, DenseLayout]:
    """Assemble a conservative dense generator over levels ``0..L``.

    Transitions out of level ``L`` towards level ``L + 1`` are kept inside
    level ``L``: the ``C`` block is added to the level-``L`` diagonal block.
    Because levels ``>= 2`` are homogeneous, this lumps all levels ``>= L``
    into one exactly, so the truncated chain's stationary vector coincides
    with the untruncated one on levels ``< L`` and carries the aggregate
    tail mass at level ``L``.
    """
    L = trunc.max_level
    layout = DenseLayout(gen.layout, L)
    n = layout.size
    Q = np.zeros((n, n))

    def put(level_from, level_to, block):
        r = layout.offset(level_from)
        c = layout.offset(level_to)
        Q[r:r + block.shape[0], c:c + block.shape[1]] += block

    Q[0, 0] = gen.q_root_root
    Q[0, layout.offset(0):layout.offset(0) + gen.q_root_0.size] = gen.q_root_0
    Q[0, layout.offset(1):layout.offset(1) + gen.q_root_1.size] = gen.q_root_1
    Q[layout.offset(0):layout.offset(0) + gen.q_0_root.size, 0] = gen.q_0_root
    Q[layout.offset(1):layout.offset(1) + gen.q_1_root.size, 0] = gen.q_1_root
    put(0, 0, gen.q00)
    put(0, 1, gen.q01)
    put(1, 1, gen.q11)
    put(1, 2, gen.q12)
    for k in range(2, L + 1):
        r = layout.offset(k)
        Q[r:r + gen.B.size, 0] = gen.B
        put(k, k, gen.A)
        if k < L:
            put(k, k + 1, gen.C)
        else:
            put(k, k, gen.C)
    return Q, layout
