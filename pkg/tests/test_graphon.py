import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from graphon_ldp import graphon as gc
from graphon_ldp.graphon import BlockGraphon

R_06_05 = 0.020135513550688863  # 0.6 log 1.2 + 0.4 log 0.8


def brute_cut(w):
    """Cut norm by enumerating every pair of block subsets."""
    n = w.shape[0]
    best = 0.0
    for s in itertools.product([0, 1], repeat=n):
        for t in itertools.product([0, 1], repeat=n):
            best = max(best, abs(np.array(s) @ w @ np.array(t)))
    return best / n ** 2


def sym_grid(n, lo=0.0, hi=1.0):
    return arrays(np.float64, (n, n), elements=st.floats(lo, hi)).map(lambda a: np.triu(a) + np.triu(a, 1).T)


grids = st.integers(1, 5).flatmap(sym_grid)


# ----------------------------------------------------------------- evaluate

def test_evaluate_examples():
    assert gc.evaluate(gc.constant(0.5), 0.3, 0.7) == 0.5
    g = BlockGraphon([[0.2, 0.4], [0.4, 0.8]])
    assert gc.evaluate(g, 0.1, 0.9) == 0.4
    assert gc.evaluate(gc.rank1([0.3, 0.4]), 1, 1) == pytest.approx(0.49, abs=1e-15)


def test_block_convention_right_open():
    g = BlockGraphon([[0.2, 0.4], [0.4, 0.8]])
    assert g(0.5, 0.5) == 0.8  # x = 1/2 opens the second block
    assert g(1.0, 1.0) == 0.8  # last block is closed
    assert g(0.4999, 0.0) == 0.2


@pytest.mark.parametrize("x,y", [(-0.1, 0.5), (0.5, 1.01), (float("nan"), 0.2)])
def test_evaluate_rejects_outside_unit_square(x, y):
    with pytest.raises(ValueError):
        gc.evaluate(gc.constant(0.5), x, y)


def test_block_graphon_validation():
    with pytest.raises(ValueError):
        BlockGraphon([[0.1, 0.2], [0.3, 0.1]])
    with pytest.raises(ValueError):
        BlockGraphon([[1.2]])
    g = BlockGraphon([[0.1]])
    with pytest.raises(ValueError):
        g.values[0, 0] = 0.3


@given(grids, st.floats(0, 1), st.floats(0, 1))
def test_evaluate_symmetric(vals, x, y):
    g = BlockGraphon(vals)
    assert gc.evaluate(g, x, y) == gc.evaluate(g, y, x)


@given(st.floats(0, 1), st.floats(0, 1))
def test_reference_families_symmetric(x, y):
    for r in (gc.rank1([0.2, 0.5, -0.1]), gc.bilinear([[0.2, 0.5, 0.3], [0.5, 0.1, 0.7], [0.3, 0.7, 0.9]])):
        assert gc.evaluate(r, x, y) == pytest.approx(gc.evaluate(r, y, x), abs=1e-15)


def test_bounds_declaration():
    r = gc.rank1([0.3, 0.4])
    assert r.lower_bound == pytest.approx(0.09) and r.upper_bound == pytest.approx(0.49)
    assert gc.rank1([0.3, 0.4], lower_bound=0.05).lower_bound == 0.05
    with pytest.raises(ValueError):
        gc.rank1([0.3, 0.4], lower_bound=0.2)
    with pytest.raises(ValueError):
        gc.rank1([0.5, 0.8])  # f(1) > 1


def test_references_touching_zero_or_one_are_rejected_for_rates():
    with pytest.raises(ValueError):
        gc.rate_I(BlockGraphon.constant(0.5), gc.constant(1.0))
    with pytest.raises(ValueError):
        gc.rate_I(BlockGraphon.constant(0.5), gc.grid([[0.0, 0.5], [0.5, 0.5]]))


def test_reference_json_roundtrip():
    for r in (gc.constant(0.3), gc.rank1([0.3, 0.4]), gc.grid([[0.2, 0.4], [0.4, 0.8]]),
              gc.bilinear([[0.2, 0.4], [0.4, 0.8]])):
        back = gc.reference_from_dict(r.to_dict())
        xs = np.linspace(0, 1, 7)
        np.testing.assert_array_equal(back(xs[:, None], xs[None, :]), r(xs[:, None], xs[None, :]))
    g = BlockGraphon([[0.2, 0.4], [0.4, 0.8]])
    assert BlockGraphon.from_dict(g.to_dict()) == g


# ----------------------------------------------------------------- degrees

def test_degree_examples():
    d = gc.degree_function(BlockGraphon([[0.2, 0.4], [0.4, 0.8]]), 10)
    np.testing.assert_allclose(d.d, [0.3, 0.6], atol=1e-15)
    assert gc.degree_function(gc.constant(0.37), 9).d == pytest.approx(np.full(9, 0.37))
    p = gc.degree_function(gc.rank1([0.3, 0.4]), 33)
    np.testing.assert_allclose(p.d, 0.5 * (0.3 + 0.4 * p.x), atol=1e-14)
    assert p.sup_norm == pytest.approx(0.35, abs=1e-14)


def test_degree_bilinear_against_quadrature():
    from scipy.integrate import quad

    r = gc.bilinear([[0.2, 0.6, 0.3], [0.6, 0.1, 0.7], [0.3, 0.7, 0.9]])
    prof = gc.degree_function(r, 11)
    for x, d in zip(prof.x, prof.d):
        ref = quad(lambda y: float(r(x, y)), 0, 1, points=[1 / 6, 0.5, 5 / 6], epsabs=1e-13)[0]
        assert d == pytest.approx(ref, abs=1e-10)


def test_degree_profile_csv():
    text = gc.degree_function(BlockGraphon([[0.2, 0.4], [0.4, 0.8]])).to_csv()
    assert text.splitlines()[0] == "x,d"
    assert text.splitlines()[1] == "0.25,0.30000000000000004" or text.splitlines()[1].startswith("0.25,0.3")


def test_degree_resolution_must_be_positive():
    with pytest.raises(ValueError):
        gc.degree_function(gc.constant(0.3), 0)


# ----------------------------------------------------------------- cut distance

def test_cut_distance_examples():
    assert gc.cut_distance(BlockGraphon.constant(0.5), BlockGraphon.constant(0.3)) == pytest.approx(0.2)
    g = BlockGraphon([[0.2, 0.4], [0.4, 0.8]])
    assert gc.cut_distance(g, g) == 0
    a = BlockGraphon([[0.9, 0.1], [0.1, 0.9]])
    b = BlockGraphon([[0.1, 0.9], [0.9, 0.1]])
    # frozen from brute force over the 16 subset pairs
    assert gc.cut_distance(a, b) == pytest.approx(0.2, abs=1e-15)


def test_cut_distance_needs_equal_blocks():
    with pytest.raises(ValueError):
        gc.cut_distance(BlockGraphon.constant(0.5, 2), BlockGraphon.constant(0.3, 3))


@given(st.integers(1, 5).flatmap(lambda n: st.tuples(sym_grid(n), sym_grid(n))))
def test_cut_norm_matches_brute_force(pair):
    a, b = pair
    assert gc.cut_distance(BlockGraphon(a), BlockGraphon(b)) == pytest.approx(brute_cut(a - b), abs=1e-12)


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(sym_grid(n), sym_grid(n), sym_grid(n))))
def test_cut_distance_pseudometric(triple):
    a, b, c = (BlockGraphon(v) for v in triple)
    dab, dbc, dac = gc.cut_distance(a, b), gc.cut_distance(b, c), gc.cut_distance(a, c)
    assert dab >= 0
    assert dab == pytest.approx(gc.cut_distance(b, a), abs=1e-15)
    assert dac <= dab + dbc + 1e-12


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(sym_grid(n), sym_grid(n))))
def test_cut_below_l1_below_linf(pair):
    a, b = (BlockGraphon(v) for v in pair)
    cut = gc.cut_distance(a, b)
    l1 = gc.lp_distance(a, b, 1)
    assert cut <= l1 + 1e-12
    assert l1 <= gc.lp_distance(a, b, np.inf) + 1e-12


def test_heuristic_cut_is_flagged_and_bounded():
    rng = np.random.default_rng(5)
    w = rng.normal(size=(24, 24))
    w = w + w.T
    res = gc.cut_norm(w)
    assert not res.exact
    s, t = res.rows.astype(float), res.cols.astype(float)
    assert res.value == pytest.approx(abs(s @ w @ t) / 24 ** 2)
    assert res.value <= np.abs(w).sum() / 24 ** 2


def test_sign_definite_difference_is_exact_at_any_size():
    res = gc.cut_norm(np.full((40, 40), 0.2))
    assert res.exact and res.value == pytest.approx(0.2)


# ----------------------------------------------------------------- cut metric

G1 = [[0.676, 0.605, 0.335, 0.452], [0.605, 0.142, 0.124, 0.373],
      [0.335, 0.124, 0.589, 0.311], [0.452, 0.373, 0.311, 0.465]]
G2 = [[0.976, 0.503, 0.405, 0.297], [0.503, 0.443, 0.276, 0.473],
      [0.405, 0.276, 0.807, 0.368], [0.297, 0.473, 0.368, 0.264]]


def test_cut_metric_examples():
    g = BlockGraphon(G1)
    perm = [2, 0, 3, 1]
    assert gc.cut_metric_blocks(g, g.permuted(perm)) == pytest.approx(0, abs=1e-15)
    assert gc.cut_metric_blocks(BlockGraphon.constant(0.5, 3), BlockGraphon.constant(0.3, 3)) == pytest.approx(0.2)
    # frozen minimum over all 24 relabellings, each cut norm by brute force
    res = gc.cut_metric_search(BlockGraphon(G1), BlockGraphon(G2))
    assert res.exact
    assert res.value == pytest.approx(0.0585, abs=1e-12)
    assert res.value <= gc.cut_distance(BlockGraphon(G1), BlockGraphon(G2))


def test_cut_metric_annealing_is_upper_bound():
    rng = np.random.default_rng(0)
    v = rng.random((10, 10))
    g = BlockGraphon((v + v.T) / 2)
    perm = rng.permutation(10)
    res = gc.cut_metric_search(g, g.permuted(perm), steps=3000)
    assert not res.exact
    assert res.value <= gc.cut_distance(g, g.permuted(perm)) + 1e-15


# ----------------------------------------------------------------- relative entropy

def test_relative_entropy_examples():
    assert gc.bernoulli_relative_entropy(0.5, 0.5) == 0
    assert gc.bernoulli_relative_entropy(0.6, 0.5) == pytest.approx(R_06_05, abs=1e-15)
    assert gc.bernoulli_relative_entropy(0.0, 0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert gc.bernoulli_relative_entropy(1.0, 0.2) == pytest.approx(-math.log(0.2), abs=1e-15)


@pytest.mark.parametrize("b", [0.0, 1.0, -0.1, float("nan")])
def test_relative_entropy_rejects_bad_reference(b):
    with pytest.raises(ValueError):
        gc.bernoulli_relative_entropy(0.3, b)


def test_relative_entropy_near_diagonal_keeps_precision():
    # R(b + e | b) ~ e^2 / (2 b (1 - b))
    b, e = 0.3, 1e-7
    assert gc.bernoulli_relative_entropy(b + e, b) == pytest.approx(e * e / (2 * b * (1 - b)), rel=1e-6)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 0.99))
def test_relative_entropy_strictly_convex(a1, a2, b):
    if abs(a1 - a2) < 1e-3:
        return
    mid = gc.bernoulli_relative_entropy((a1 + a2) / 2, b)
    avg = (gc.bernoulli_relative_entropy(a1, b) + gc.bernoulli_relative_entropy(a2, b)) / 2
    assert mid < avg


@given(st.floats(0, 1), st.floats(0.001, 0.999))
def test_relative_entropy_nonnegative(a, b):
    assert gc.bernoulli_relative_entropy(a, b) >= 0


# ----------------------------------------------------------------- rate functional

def test_rate_I_examples():
    g = BlockGraphon([[0.2, 0.4], [0.4, 0.8]])
    assert gc.rate_I(g, gc.grid(g)) == 0
    assert gc.rate_I(BlockGraphon.zero(3), gc.constant(0.5)) == pytest.approx(math.log(2), abs=1e-15)
    assert gc.rate_I(BlockGraphon.constant(0.4, 2), gc.constant(0.5)) == pytest.approx(R_06_05, abs=1e-15)


def test_rate_I_analytic_reference_against_dblquad():
    from scipy.integrate import dblquad

    r = gc.rank1([0.3, 0.4])
    h = BlockGraphon([[0.1, 0.3], [0.3, 0.6]])
    ref = dblquad(lambda y, x: gc.bernoulli_relative_entropy(float(h(x, y)), float(r(x, y))),
                  0, 1, 0, 1, epsabs=1e-12)[0]
    # dblquad ignores the jump at 1/2, so compare per quadrant
    total = 0.0
    for (a, b) in [(0, 0.5), (0.5, 1)]:
        for (c, d) in [(0, 0.5), (0.5, 1)]:
            total += dblquad(lambda y, x: gc.bernoulli_relative_entropy(float(h(x, y)), float(r(x, y))),
                             a, b, c, d, epsabs=1e-13)[0]
    assert gc.rate_I(h, r) == pytest.approx(total, abs=1e-8)
    assert ref == pytest.approx(total, abs=1e-6)


@given(st.integers(1, 4).flatmap(lambda n: st.tuples(sym_grid(n, 0.0, 1.0), sym_grid(n, 0.05, 0.95))))
def test_rate_I_zero_iff_equal(pair):
    h, r = pair
    val = gc.rate_I(BlockGraphon(h), gc.grid(r))
    assert val >= 0
    if np.array_equal(h, r):
        assert val == 0
    else:
        assert val > 0


@given(st.sampled_from([1, 2, 3]).flatmap(lambda n: st.tuples(st.just(n), sym_grid(4 * n, 0, 1), sym_grid(4 * n, 0.05, 0.95))))
def test_block_average_contracts_rate(args):
    n, h, r = args
    hb = gc.block_average(BlockGraphon(h), n)
    rb = gc.block_average(BlockGraphon(r), n)
    assert gc.rate_I(hb, gc.grid(rb)) <= gc.rate_I(BlockGraphon(h), gc.grid(r)) + 1e-12


# ----------------------------------------------------------------- block average

def test_block_average_examples():
    assert gc.block_average(gc.constant(0.3), 5) == BlockGraphon.constant(0.3, 5)
    assert gc.block_average(gc.rank1([0.3, 0.4]), 1).values[0, 0] == pytest.approx(0.25, abs=1e-14)
    g = BlockGraphon([[0.2, 0.4], [0.4, 0.8]])
    assert gc.block_average(gc.grid(g), 2) == g


def test_block_average_rank1_matches_separable_oracle():
    n = 4
    edges = np.arange(n + 1) / n
    # integral of f over each block, exact for a linear f
    fi = np.array([(0.3 * (b - a) + 0.2 * (b * b - a * a)) * n for a, b in zip(edges[:-1], edges[1:])])
    avg = gc.block_average(gc.rank1([0.3, 0.4]), n).values
    np.testing.assert_allclose(avg, np.outer(fi, fi), atol=1e-10)


def test_block_average_of_bilinear_on_its_own_grid():
    # Bilinear interpolation is a tensor product of 1-D hat interpolants, whose
    # cell averages are (1/8, 3/4, 1/8) inside and (7/8, 1/8) at the clamped
    # ends.  So the average on the node grid is W V W^T, not V itself.
    vals = np.array([[0.2, 0.6, 0.3], [0.6, 0.1, 0.7], [0.3, 0.7, 0.9]])
    w = np.array([[7 / 8, 1 / 8, 0], [1 / 8, 3 / 4, 1 / 8], [0, 1 / 8, 7 / 8]])
    avg = gc.block_average(gc.bilinear(vals), 3).values
    np.testing.assert_allclose(avg, w @ vals @ w.T, atol=1e-10)
    flat = np.full((3, 3), 0.4)
    np.testing.assert_allclose(gc.block_average(gc.bilinear(flat), 3).values, flat, atol=1e-14)


def test_block_average_symmetric():
    avg = gc.block_average(gc.bilinear([[0.2, 0.6], [0.6, 0.1]]), 7).values
    np.testing.assert_array_equal(avg, avg.T)


# ----------------------------------------------------------------- Lp distance

def test_lp_examples():
    g = BlockGraphon([[0.2, 0.4], [0.4, 0.8]])
    for p in (1, 2, np.inf):
        assert gc.lp_distance(g, g, p) == 0
    assert gc.lp_distance(BlockGraphon.constant(0.5), BlockGraphon.constant(0.3), np.inf) == pytest.approx(0.2)
    h = BlockGraphon([[0.1, 0.5], [0.5, 0.4]])
    assert gc.lp_distance(g, h, 1) == pytest.approx((0.1 + 0.1 + 0.1 + 0.4) / 4)


def test_lp_common_refinement():
    a = BlockGraphon.constant(0.5, 2)
    b = BlockGraphon([[0.5, 0.2, 0.5], [0.2, 0.5, 0.5], [0.5, 0.5, 0.5]])
    assert gc.lp_distance(a, b, 1) == pytest.approx(2 * 0.3 / 9)
    with pytest.raises(ValueError):
        gc.lp_distance(a, b, 3)
