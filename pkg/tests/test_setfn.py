import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesf.diffnet import MlpParams
from gesf.errors import PreconditionError, ResourceError
from gesf.setfn import (DeepSetModel, GroupedInput, all_permutations, appendix_example,
                        brute_symmetrize, deepset_eval, fit_invariant, monomial_sym,
                        partitions_up_to, power_sum_expansion, power_sums, random_deepset)

values = st.floats(-3, 3, allow_nan=False)


def linear_deepset(sizes):
    """g_k = identity on scalars, h = sum of pooled coordinates."""
    K = len(sizes)
    g = [MlpParams([np.eye(1)], [np.zeros(1)]) for _ in range(K)]
    return DeepSetModel(g, MlpParams([np.ones((1, K))], [np.zeros(1)]))


class TestGroupedInput:
    def test_scalars_become_columns(self):
        x = GroupedInput(([1.0, 2.0], [3.0]))
        assert x.sizes == (2, 1) and x.element_dims == (1, 1)
        assert x.flat.tolist() == [1.0, 2.0, 3.0]

    def test_with_flat_roundtrip(self):
        x = GroupedInput((np.arange(6.0).reshape(3, 2), [7.0]))
        assert np.array_equal(x.with_flat(x.flat).flat, x.flat)

    @pytest.mark.parametrize("groups", [(), ([],), ([np.nan],)])
    def test_invalid(self, groups):
        with pytest.raises(ValueError):
            GroupedInput(groups)


class TestDeepset:
    def test_linear_configuration(self):
        x = GroupedInput(([1.0, 2.0, 3.0], [4.0, -5.0]))
        assert deepset_eval(linear_deepset(x.sizes), x) == pytest.approx(5.0)

    def test_single_element_groups(self):
        m = random_deepset((1, 2), (3, 2), hidden=4, seed=0)
        from gesf.diffnet import mlp_forward
        x = GroupedInput(([0.5], [[1.0, -1.0]]))
        pooled = np.concatenate([mlp_forward(m.g[0], x.groups[0][0])[0], mlp_forward(m.g[1], x.groups[1][0])[0]])
        assert deepset_eval(m, x) == pytest.approx(float(mlp_forward(m.h, pooled)[0][0]), abs=1e-15)

    def test_dimension_mismatch(self):
        m = random_deepset((1,), (2,), seed=0)
        with pytest.raises(ValueError):
            deepset_eval(m, GroupedInput(([[1.0, 2.0]],)))
        with pytest.raises(ValueError):
            deepset_eval(m, GroupedInput(([1.0], [2.0])))
        with pytest.raises(ValueError):
            DeepSetModel(m.g, MlpParams([np.ones((1, 5))], [np.zeros(1)]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.lists(st.integers(1, 3), min_size=1, max_size=3))
    def test_partial_permutation_invariance(self, seed, sizes):
        rng = np.random.default_rng(seed)
        m = random_deepset([1] * len(sizes), [2] * len(sizes), hidden=5, seed=seed)
        x = GroupedInput(tuple(rng.normal(size=n) for n in sizes))
        base = deepset_eval(m, x)
        for perms in all_permutations(sizes):
            assert abs(deepset_eval(m, x.permuted(perms)) - base) <= 1e-9 * max(1, abs(base))


class TestBruteSymmetrize:
    def test_invariant_fixed_point(self):
        x = GroupedInput(([1.0, 2.0, 3.0], [0.5, -1.0]))
        q = lambda v: float(np.sum(v[:3]) * np.prod(v[3:]))
        assert brute_symmetrize(q, x) == pytest.approx(q(x.flat), abs=1e-12)

    def test_two_permutation_average(self):
        x = GroupedInput(([1.0, 4.0],))
        assert brute_symmetrize(lambda v: v[0], x) == pytest.approx(2.5)
        assert brute_symmetrize(lambda v: v[0], x, unnormalized=True) == pytest.approx(5.0)

    def test_result_is_invariant(self):
        x = GroupedInput(([1.0, 2.0, 5.0], [3.0, 7.0]))
        q = lambda v: v[0] * v[1] ** 2 + v[3] ** 3 * v[2]
        base = brute_symmetrize(q, x)
        for perms in all_permutations(x.sizes):
            assert brute_symmetrize(q, x.permuted(perms)) == pytest.approx(base, rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_deepset_is_fixed_point(self, seed):
        rng = np.random.default_rng(seed)
        m = random_deepset((1, 1), (3, 2), hidden=4, seed=seed)
        x = GroupedInput((rng.normal(size=3), rng.normal(size=3)))
        sym = brute_symmetrize(lambda v: deepset_eval(m, x.with_flat(v)), x)
        assert abs(sym - deepset_eval(m, x)) <= 1e-9 * max(1, abs(sym))

    def test_guard(self):
        x = GroupedInput((np.zeros(10),))
        with pytest.raises(ResourceError):
            brute_symmetrize(lambda v: 0.0, x)


class TestPolynomials:
    def test_power_sums(self):
        assert power_sums([1, 2, 3], 3).tolist() == [6, 14, 36]
        assert power_sums([3, 1, 2], 3).tolist() == [6, 14, 36]
        assert power_sums([2.0], 4).tolist() == [2, 4, 8, 16]
        with pytest.raises(ValueError):
            power_sums([1.0], 0)

    def test_monomial_examples(self):
        assert monomial_sym((2, 1), (1, 2)) == 6
        assert monomial_sym((1, 1), (1, 2)) == 2
        assert monomial_sym((0, 0, 0), (4, 5, 6)) == 1
        with pytest.raises(ValueError):
            monomial_sym((1, 2), (1, 2))
        with pytest.raises(ValueError):
            monomial_sym((2, 1), (1, 2, 3))

    @settings(max_examples=100, deadline=None)
    @given(values, values)
    def test_m21_identity(self, a, b):
        p1, p2, p3 = power_sums([a, b], 3)
        assert monomial_sym((2, 1), [a, b]) == pytest.approx(p1 * p2 - p3, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(values, min_size=3, max_size=3), st.permutations([0, 1, 2]))
    def test_monomial_symmetric(self, xs, perm):
        lam = (3, 1, 0)
        assert monomial_sym(lam, xs) == pytest.approx(monomial_sym(lam, [xs[i] for i in perm]), abs=1e-9)

    def test_partitions(self):
        assert partitions_up_to(2, 1) == [(1, 1), (1, 0), (0, 0)]
        assert len(partitions_up_to(3, 3)) == math.comb(6, 3)

    @pytest.mark.parametrize("lam", [lam for n in (1, 2, 3) for lam in partitions_up_to(n, 3)])
    def test_power_sum_expansion(self, lam):
        coef, resid = power_sum_expansion(lam)
        assert resid <= 1e-8

    def test_known_expansion(self):
        coef, _ = power_sum_expansion((1, 1))
        # m^(1,1) = (p1^2 - p2) / 2
        assert coef[(2, 0)] == pytest.approx(0.5, abs=1e-9)
        assert coef[(0, 1)] == pytest.approx(-0.5, abs=1e-9)


class TestWorkedExample:
    def test_value(self):
        assert appendix_example(1, 2, 1, 2) == (324, 324)

    def test_zero_first_group(self):
        assert appendix_example(0, 0, 3.0, -2.0) == (0, 0)

    @settings(max_examples=300, deadline=None)
    @given(values, values, values, values)
    def test_identity(self, a, b, c, d):
        e, f = appendix_example(a, b, c, d)
        assert abs(e - f) <= 1e-9 * max(1, abs(e))

    def test_partially_invariant(self):
        rng = np.random.default_rng(0)
        a, b, c, d = rng.normal(size=4)
        base = appendix_example(a, b, c, d)[0]
        for x in itertools.product([(a, b), (b, a)], [(c, d), (d, c)]):
            assert appendix_example(*x[0], *x[1])[0] == pytest.approx(base, rel=1e-12)


class TestFitInvariant:
    def test_linear_target(self):
        m, mse = fit_invariant(lambda x: float(x.groups[0].sum()), (3,), steps=5000, seed=0)
        assert mse <= 1e-4
        x = GroupedInput(([0.1, -0.4, 0.3],))
        assert deepset_eval(m, x) == pytest.approx(0.0, abs=0.03)

    def test_constant_target(self):
        _, mse = fit_invariant(lambda x: 1.0, (2,), steps=3000, seed=1)
        assert mse <= 1e-6

    def test_deterministic(self):
        f = lambda x: float(x.groups[0].max())
        _, a = fit_invariant(f, (2,), steps=200, train_n=512, test_n=256, seed=3)
        _, b = fit_invariant(f, (2,), steps=200, train_n=512, test_n=256, seed=3)
        assert a == b

    def test_rejects_non_invariant_target(self):
        with pytest.raises(PreconditionError):
            fit_invariant(lambda x: float(x.groups[0][0, 0]), (2,), steps=10)
