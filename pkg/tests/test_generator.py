import numpy as np
import pytest
from hypothesis import given, settings

from conftest import valid_params
from pyramid_mining.errors import ZeroDiagonal
from pyramid_mining.generator import PhaseLayout, assemble_dense, build_generator, invert_upper_bidiagonal
from pyramid_mining.model import DetainSchedule, ModelParams, TruncationConfig, derive_rates
from pyramid_mining.stationary import dense_oracle

K2 = ModelParams(detain=DetainSchedule((1.0,)))


def test_phase_sets_for_cutoff_two():
    lay = PhaseLayout(2)
    assert list(lay.leads(0)) == [1, 2]
    assert list(lay.leads(1)) == [-1, 0, 1, 2]
    assert list(lay.leads(5)) == [-2, -1, 0, 1, 2]
    assert lay.index(3, -2) == 0 and lay.lead(3, 4) == 2


def test_diagonal_block_entries():
    gen = build_generator(K2)
    r = derive_rates(K2)
    assert gen.A[0, 0] == -(r.a + r.mu)
    assert gen.q_root_root == -45.5
    # lead 2 pegs with certainty at the cutoff
    assert gen.A[-1, -1] == -(r.b + r.mu)
    np.testing.assert_allclose(np.diag(gen.A)[1:-1], -(r.a + r.b))


def test_root_row_and_first_phases(default_params):
    gen = build_generator(default_params)
    assert gen.q_root_0[0] == 22.5 and gen.q_root_1[0] == 23.0
    assert gen.q_root_0[1:].sum() == 0 and gen.q_root_1[1:].sum() == 0


@pytest.mark.parametrize("params", [K2, ModelParams(), ModelParams(detain=DetainSchedule((0.2, 0.5, 0.7, 1.0)))])
def test_dense_generator_axioms(params):
    Q, lay = assemble_dense(build_generator(params), TruncationConfig(max_level=6))
    off = Q - np.diag(np.diag(Q))
    assert off.min() >= 0
    np.testing.assert_allclose(Q.sum(axis=1), 0.0, atol=1e-12)
    assert lay.size == Q.shape[0]


def test_dense_dimension_cutoff_two():
    Q, _ = assemble_dense(build_generator(K2), TruncationConfig(max_level=4))
    assert Q.shape == (22, 22)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(valid_params())
def test_blocks_are_conservative(p):
    gen = build_generator(p)
    scale = max(abs(gen.q_root_root), 1.0) * 4
    tol = 1e-12 * scale
    assert abs(gen.q_root_root + gen.q_root_0.sum() + gen.q_root_1.sum()) < tol
    np.testing.assert_allclose(gen.q_0_root + gen.q00.sum(1) + gen.q01.sum(1), 0, atol=tol)
    np.testing.assert_allclose(gen.q_1_root + gen.q11.sum(1) + gen.q12.sum(1), 0, atol=tol)
    # levels >= 2: root exits are the rows of A + C that fall short of zero
    leak = gen.A.sum(1) + gen.C.sum(1)
    np.testing.assert_allclose(leak + gen.B, 0, atol=tol)


@pytest.mark.parametrize(
    "diag, sup, expected",
    [
        ((-2.0, -2.0), (1.0,), [[-0.5, -0.25], [0.0, -0.5]]),
        ((-1.0, 4.0, 0.5), (0.0, 0.0), np.diag([-1.0, 0.25, 2.0])),
    ],
)
def test_bidiagonal_inverse_small(diag, sup, expected):
    np.testing.assert_allclose(invert_upper_bidiagonal(diag, sup), expected, rtol=1e-15)


def test_bidiagonal_inverse_element_formula():
    inv = invert_upper_bidiagonal((-3.0, -2.0, -4.0), (1.0, 2.0))
    assert inv[0, 2] == pytest.approx(-1.0 / 12.0, rel=1e-15)


@pytest.mark.parametrize("n", [1, 5, 40])
def test_bidiagonal_inverse_matches_solve(n):
    rng = np.random.default_rng(n)
    d = -rng.uniform(1.0, 5.0, n)
    f = rng.uniform(0.0, 3.0, n - 1)
    M = np.diag(d) + np.diag(f, 1)
    np.testing.assert_allclose(invert_upper_bidiagonal(d, f) @ M, np.eye(n), atol=1e-12)


def test_bidiagonal_zero_diagonal():
    with pytest.raises(ZeroDiagonal):
        invert_upper_bidiagonal((1.0, 0.0), (1.0,))


def test_dense_truncation_converges(default_params):
    gen = build_generator(default_params)
    small, lay_s = dense_oracle(gen, TruncationConfig(max_level=20))
    large, lay_l = dense_oracle(gen, TruncationConfig(max_level=40))
    # lumping is exact below the last level, so the two agree to round-off
    upto = lay_s.offset(11)
    assert np.max(np.abs(small[:upto] - large[:upto])) < 1e-10


def test_triples_cover_nonzero_entries(default_params):
    gen = build_generator(default_params)
    triples = list(gen.triples())
    assert ("q_root_root", 0, 0, -45.5) in triples
    assert sum(name == "A" for name, *_ in triples) == np.count_nonzero(gen.A)
