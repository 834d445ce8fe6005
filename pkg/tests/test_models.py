import itertools
from fractions import Fraction

import numpy as np
import pytest

from corrscen.correlation import is_correlation
from corrscen.dist import JointDistribution, perfect_correlation, pr_box_correlation
from corrscen.errors import IrrationalKernel, NotStarForest, ScenarioMismatch
from corrscen.models import (
    ClassicalModel,
    FitResult,
    Inconclusive,
    NotRealizableUpTo,
    Realizable,
    SupportPattern,
    determinize,
    evaluate_classical,
    fit_probabilities,
    interpolate,
    random_classical_model,
    star_model_construct,
    support_realizable,
)
from corrscen.scenario import c3_scenario, c4_scenario, p4_scenario, star_scenario


def brute_force_evaluate(m):
    """Oracle: plain loops over hidden combinations and outcome tuples."""
    s = m.scenario
    cards = s.outcome_counts
    table = np.zeros(cards)
    hidden = [range(len(d)) for d in m.source_dists]
    for combo in itertools.product(*hidden):
        w = 1.0
        for e, lam in enumerate(combo):
            w *= float(m.source_dists[e][lam])
        for outcome in itertools.product(*(range(c) for c in cards)):
            q = w
            for v in range(len(cards)):
                idx = tuple(combo[e] for e in s.sources_of_measurement[v])
                q *= float(m.kernels[v][idx + (outcome[v],)])
            table[outcome] += q
    return table


def xor_triangle_model():
    """Uniform binary hidden values; a = CA^AB, b = AB^BC, c = BC^CA."""
    s = c3_scenario()
    half = np.array([0.5, 0.5])
    # kernel axes per measurement: a: (AB, CA), b: (AB, BC), c: (BC, CA)
    def xor_kernel():
        kernel = np.zeros((2, 2, 2))
        for u, w in itertools.product(range(2), repeat=2):
            kernel[u, w, u ^ w] = 1.0
        return kernel

    return ClassicalModel(s, (half.copy(), half.copy(), half.copy()),
                          (xor_kernel(), xor_kernel(), xor_kernel()))


class TestEvaluate:
    def test_xor_triangle_gives_even_parity_uniform(self):
        p = evaluate_classical(xor_triangle_model())
        expected = brute_force_evaluate(xor_triangle_model())
        assert np.allclose(p.table, expected)
        for a, b, c in itertools.product(range(2), repeat=3):
            want = 0.25 if a ^ b ^ c == 0 else 0.0
            assert p.table[a, b, c] == pytest.approx(want)

    def test_deterministic_constants_give_point_mass(self):
        s = c3_scenario()
        dists = tuple(np.array([1.0]) for _ in range(3))
        kernels = tuple(np.array([[[0.0, 1.0]]]) for _ in range(3))
        p = evaluate_classical(ClassicalModel(s, dists, kernels))
        assert p.table[1, 1, 1] == pytest.approx(1.0)

    def test_float_matches_exact(self):
        rng = np.random.default_rng(2)
        m = random_classical_model(c4_scenario(), 2, rng=rng, rational_denominator=8)
        exact = evaluate_classical(m)
        floats = evaluate_classical(m.to_float())
        assert np.allclose(exact.table.astype(float), floats.table, atol=1e-12)

    def test_random_models_evaluate_to_correlations(self):
        rng = np.random.default_rng(3)
        for s in (p4_scenario(), c3_scenario(), c4_scenario(), star_scenario(3)):
            for _ in range(10):
                m = random_classical_model(s, int(rng.integers(1, 4)), rng=rng)
                p = evaluate_classical(m)
                assert abs(float(p.table.sum()) - 1.0) < 1e-12
                assert is_correlation(s, p).is_correlation

    def test_kernel_shape_validation(self):
        s = c3_scenario()
        with pytest.raises(ScenarioMismatch):
            ClassicalModel(s, tuple(np.array([0.5, 0.5]) for _ in range(3)),
                           tuple(np.zeros((2, 2)) for _ in range(3)))


class TestDeterminize:
    def test_requires_exact(self):
        m = random_classical_model(c3_scenario(), 2, rng=np.random.default_rng(0))
        with pytest.raises(IrrationalKernel):
            determinize(m)

    def test_already_deterministic_unchanged(self):
        m = xor_triangle_model().to_exact()
        d = determinize(m)
        assert d.hidden_cards == m.hidden_cards
        assert evaluate_classical(d).table.tolist() == evaluate_classical(m).table.tolist()

    def test_fair_coin_doubles_first_source(self):
        s = p4_scenario()
        half = np.array([Fraction(1, 2), Fraction(1, 2)], dtype=object)
        point = np.array([Fraction(1)], dtype=object)
        identity = np.array([[Fraction(1), Fraction(0)],
                             [Fraction(0), Fraction(1)]], dtype=object)
        coin = np.empty((2, 1, 2), dtype=object)  # a depends on XA (card 2), AB (card 1)
        coin[...] = Fraction(1, 2)
        const = np.array([[Fraction(1), Fraction(0)]], dtype=object)  # b reads AB only
        b_kernel = np.empty((1, 1, 2), dtype=object)
        b_kernel[0, 0] = [Fraction(1), Fraction(0)]
        y_kernel = np.array([[Fraction(1), Fraction(0)]], dtype=object)
        m = ClassicalModel(s, (half, point, point),
                           (identity, coin, b_kernel, y_kernel))
        before = evaluate_classical(m)
        d = determinize(m)
        # the coin at `a` is bundled into XA: cardinality 2 -> 4
        assert d.hidden_cards[0] == 4
        assert all(p in (Fraction(0), Fraction(1)) for k in d.kernels for p in k.flat)
        after = evaluate_classical(d)
        assert after.table.tolist() == before.table.tolist()

    def test_third_denominator_triples_adjacent_source(self):
        s = c3_scenario()
        rng = np.random.default_rng(5)
        m = random_classical_model(s, 2, rng=rng, rational_denominator=3)
        before = evaluate_classical(m)
        d = determinize(m)
        after = evaluate_classical(d)
        assert after.table.tolist() == before.table.tolist()
        assert all(p in (Fraction(0), Fraction(1)) for k in d.kernels for p in k.flat)
        # a's randomness (denominator 3) lands in source AB
        assert d.hidden_cards[0] % 3 == 0

    @pytest.mark.parametrize("seed", range(6))
    def test_law_preserved_exactly_across_scenarios(self, seed):
        rng = np.random.default_rng(100 + seed)
        for s in (p4_scenario(), c3_scenario(), c4_scenario()):
            m = random_classical_model(s, 2, rng=rng, rational_denominator=3)
            d = determinize(m)
            assert evaluate_classical(d).table.tolist() == evaluate_classical(m).table.tolist()


class TestInterpolate:
    def test_endpoints_exact(self):
        rng = np.random.default_rng(7)
        m0 = random_classical_model(c3_scenario(), 2, rng=rng)
        m1 = random_classical_model(c3_scenario(), 3, rng=rng)
        p0, p1 = evaluate_classical(m0), evaluate_classical(m1)
        at0 = evaluate_classical(interpolate(m0, m1, 0.0))
        at1 = evaluate_classical(interpolate(m0, m1, 1.0))
        assert np.abs(at0.table - p0.table).max() < 1e-12
        assert np.abs(at1.table - p1.table).max() < 1e-12

    def test_midpoint_against_brute_force(self):
        s = c3_scenario()

        def point_model(values):
            dists = tuple(np.array([1.0]) for _ in range(3))
            kernels = []
            for v in values:
                kernel = np.zeros((1, 1, 2))
                kernel[0, 0, v] = 1.0
                kernels.append(kernel)
            return ClassicalModel(s, dists, tuple(kernels))

        m0 = point_model([0, 0, 0])
        m1 = point_model([1, 1, 1])
        blend = interpolate(m0, m1, 0.5)
        got = evaluate_classical(blend)
        expected = brute_force_evaluate(blend)
        assert np.allclose(got.table, expected)
        # each measurement flips independently with probability 1/2
        assert np.allclose(got.table, np.full((2, 2, 2), 0.125))

    def test_family_members_are_correlations(self):
        rng = np.random.default_rng(11)
        s = c4_scenario()
        m0 = random_classical_model(s, 2, rng=rng)
        m1 = random_classical_model(s, 2, rng=rng)
        for t in (0.0, 0.25, 0.5, 0.75, 1.0):
            p = evaluate_classical(interpolate(m0, m1, t))
            assert is_correlation(s, p).is_correlation

    def test_scenario_mismatch(self):
        with pytest.raises(ScenarioMismatch):
            interpolate(random_classical_model(c3_scenario(), 2, rng=np.random.default_rng(1)),
                        random_classical_model(c4_scenario(), 2, rng=np.random.default_rng(1)),
                        0.5)


def random_star_correlation(s, rng):
    """Random correlation on a star: product of leaf marginals times a
    conditional for the center, assembled independently of any model code."""
    names = s.measurement_names
    center = "a"
    leaves = [n for n in names if n != center]
    cards = dict(zip(names, s.outcome_counts))
    leaf_margs = {n: rng.dirichlet([1.0] * cards[n]) for n in leaves}
    table = np.zeros(s.outcome_counts)
    index = {n: i for i, n in enumerate(names)}
    for leaf_vals in itertools.product(*(range(cards[n]) for n in leaves)):
        cond = rng.dirichlet([1.0] * cards[center])
        weight = np.prod([leaf_margs[n][v] for n, v in zip(leaves, leaf_vals)])
        for cv in range(cards[center]):
            idx = [0] * len(names)
            idx[index[center]] = cv
            for n, v in zip(leaves, leaf_vals):
                idx[index[n]] = v
            table[tuple(idx)] = weight * cond[cv]
    return JointDistribution(names, s.outcome_counts, table)


class TestStarConstruct:
    def test_reproduces_random_star_correlations(self):
        rng = np.random.default_rng(13)
        for k in (2, 3):
            s = star_scenario(k)
            for _ in range(20):
                p = random_star_correlation(s, rng)
                m = star_model_construct(s, p)
                q = evaluate_classical(m)
                assert np.abs(q.table - p.table).max() < 1e-12

    def test_rejects_non_star(self):
        with pytest.raises(NotStarForest):
            star_model_construct(c3_scenario(), perfect_correlation())

    def test_rejects_non_correlation(self):
        s = star_scenario(2)
        table = np.zeros((2, 2, 2))
        table[0, 0, 0] = table[1, 1, 1] = 0.5  # leaves perfectly correlated
        p = JointDistribution(s.measurement_names, (2, 2, 2), table)
        from corrscen.errors import NotACorrelation
        with pytest.raises(NotACorrelation):
            star_model_construct(s, p)


class TestSupportRealizable:
    def test_pr_box_support_not_realizable(self):
        s = c4_scenario()
        sp = SupportPattern.of(pr_box_correlation())
        assert len(sp.tuples) == 8
        result = support_realizable(s, sp, 8)
        assert isinstance(result, NotRealizableUpTo)
        assert result.complete

    def test_perfect_correlation_support_not_realizable_on_triangle(self):
        s = c3_scenario()
        sp = SupportPattern.of(perfect_correlation())
        for k in (1, 2, 4):
            result = support_realizable(s, sp, k)
            assert isinstance(result, NotRealizableUpTo)

    def test_full_support_realizable(self):
        s = c3_scenario()
        sp = SupportPattern(("a", "b", "c"), (2, 2, 2),
                            frozenset(itertools.product(range(2), repeat=3)))
        result = support_realizable(s, sp, 2)
        assert isinstance(result, Realizable)
        got = frozenset(evaluate_classical(result.model).support())
        assert got == sp.tuples

    def test_budget_gives_inconclusive(self):
        s = c4_scenario()
        sp = SupportPattern.of(pr_box_correlation())
        result = support_realizable(s, sp, 8, node_budget=1)
        assert isinstance(result, Inconclusive)

    def test_reduction_validated_on_triangle_supports(self):
        """Any realizable support is realizable with |support| hidden values."""
        s = c3_scenario()
        all_tuples = list(itertools.product(range(2), repeat=3))
        rng = np.random.default_rng(17)
        # every support size, a sample of supports per size, plus edge cases
        supports = [frozenset(all_tuples), frozenset({(0, 0, 0)})]
        for size in range(2, 8):
            for _ in range(6):
                chosen = rng.choice(len(all_tuples), size=size, replace=False)
                supports.append(frozenset(all_tuples[i] for i in chosen))
        for supp in supports:
            sp = SupportPattern(("a", "b", "c"), (2, 2, 2), supp)
            reference = support_realizable(s, sp, len(supp))
            for k in (4, 5, 6):
                raw = support_realizable(s, sp, k, _clamp=False)
                if isinstance(raw, Realizable):
                    assert isinstance(reference, Realizable), (supp, k)
                if isinstance(reference, NotRealizableUpTo):
                    assert isinstance(raw, NotRealizableUpTo), (supp, k)
                if k >= len(supp):
                    assert type(raw) is type(reference), (supp, k)


class TestFitProbabilities:
    def test_product_distribution_on_triangle(self):
        s = c3_scenario()
        rng = np.random.default_rng(19)
        m1, m2, m3 = (rng.dirichlet([2, 2]) for _ in range(3))
        table = np.einsum("i,j,k->ijk", m1, m2, m3)
        p = JointDistribution(("a", "b", "c"), (2, 2, 2), table)
        result = fit_probabilities(s, p, k=2, rng=1)
        assert result.certified
        assert result.residual <= 1e-6

    def test_classical_p4_correlation(self):
        rng = np.random.default_rng(23)
        m = random_classical_model(p4_scenario(), 2, rng=rng)
        p = evaluate_classical(m)
        result = fit_probabilities(p4_scenario(), p, k=2, rng=2)
        assert result.certified

    def test_pr_box_is_never_certified(self):
        result = fit_probabilities(c4_scenario(), pr_box_correlation(), k=4,
                                   restarts=3, sweeps=25, rng=3)
        assert not result.certified
        assert result.residual > 1e-6


class TestMonogamy:
    def test_perfect_ac_correlation_forces_ab_independence(self):
        """Models where a and c both copy the shared CA value: I(a:b) -> 0."""
        rng = np.random.default_rng(29)
        s = c3_scenario()
        for _ in range(50):
            k_ab, k_bc, k_ca = rng.integers(1, 4), rng.integers(1, 4), 2
            dists = (rng.dirichlet([1.0] * k_ab), rng.dirichlet([1.0] * k_bc),
                     rng.dirichlet([1.0] * 2))
            copy_ca = np.zeros((k_ab, 2, 2))
            copy_ca[:, 0, 0] = copy_ca[:, 1, 1] = 1.0
            copy_ca_c = np.zeros((k_bc, 2, 2))
            copy_ca_c[:, 0, 0] = copy_ca_c[:, 1, 1] = 1.0
            b_rows = rng.dirichlet([1.0] * 2, size=(k_ab, k_bc))
            m = ClassicalModel(s, dists, (copy_ca, b_rows, copy_ca_c))
            p = evaluate_classical(m)
            assert float(p.table[0, 0, 1] + p.table[0, 1, 1]
                         + p.table[1, 0, 0] + p.table[1, 1, 0]) < 1e-12  # a == c
            assert p.mutual_information(["a"], ["b"]) < 1e-7
