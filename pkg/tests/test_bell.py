import itertools

import numpy as np
import pytest

from corrscen.bell import (
    Classical,
    ConditionalBox,
    Local,
    NonClassical,
    NonLocal,
    bgp_classical_to_p5_model,
    box_from_correlation,
    decide_ak,
    decide_p4,
    deterministic_boxes,
    embed_bell_to_p4,
    embed_bgp_to_p5,
    is_no_signaling,
    local_polytope_membership,
    pr_box,
    signaling_deviation,
    time_reverse_relabel,
)
from corrscen.correlation import is_correlation
from corrscen.dist import JointDistribution, pr_box_correlation, uniform
from corrscen.errors import (
    EmptySettingSupport,
    MalformedBGPInput,
    NotACorrelation,
    SignalingBox,
    StrategyBudgetExceeded,
)
from corrscen.lp import as_exact_array
from corrscen.models import evaluate_classical
from corrscen.quantum import chsh_value, evaluate_quantum, random_two_qubit_p4_model
from corrscen.scenario import validate_scenario


def sized_p5(cards):
    return validate_scenario({
        "measurements": [{"name": n, "outcomes": cards[n]} for n in "xabcz"],
        "sources": [{"name": "XA", "connects": ["x", "a"]},
                    {"name": "AB", "connects": ["a", "b"]},
                    {"name": "BC", "connects": ["b", "c"]},
                    {"name": "CZ", "connects": ["c", "z"]}],
    })


class TestBoxFromCorrelation:
    def test_pr_correlation_gives_pr_box(self):
        box, marginal = box_from_correlation(pr_box_correlation(), ("x", "y"), ("a", "b"))
        assert np.allclose(box.table, pr_box().table)
        assert np.allclose(marginal.table, 0.25)

    def test_output_constant_in_independent_input(self):
        # p(a, x) = p(a) p(x): the box ignores the setting
        table = np.outer([0.3, 0.7], [0.6, 0.4])
        p = JointDistribution(("a", "x"), (2, 2), table)
        box, _ = box_from_correlation(p, ("x",), ("a",))
        assert np.allclose(box.table[0], box.table[1])

    def test_zero_probability_settings_dropped(self):
        table = np.zeros((3, 2))  # x has 3 values, one never occurs
        table[0] = [0.2, 0.2]
        table[2] = [0.1, 0.5]
        p = JointDistribution(("x", "a"), (3, 2), table)
        box, _ = box_from_correlation(p, ("x",), ("a",))
        assert box.parties == ((2, 2),)
        assert box.setting_values == ((0, 2),)

    def test_no_positive_setting_raises(self):
        # conditioning on a correlated-but-gapped setting pair is undefined
        table = np.zeros((2, 2, 2, 2))
        table[0, 0, 0, 0] = 0.5
        table[1, 1, 0, 0] = 0.5
        p = JointDistribution(("x", "y", "a", "b"), (2, 2, 2, 2), table)
        with pytest.raises(EmptySettingSupport):
            box_from_correlation(p, ("x", "y"), ("a", "b"))


class TestNoSignaling:
    def test_pr_box(self):
        assert is_no_signaling(pr_box())

    def test_constant_box(self):
        table = np.zeros((2, 2, 2, 2))
        table[:, :, 0, 1] = 1.0
        assert is_no_signaling(ConditionalBox(((2, 2), (2, 2)), table))

    def test_signaling_box_detected(self):
        # a copies x: fine for a's own setting, but also leak x to b
        table = np.zeros((2, 2, 2, 2))
        for x, y in np.ndindex(2, 2):
            table[x, y, x, x] = 1.0  # b announces x too
        box = ConditionalBox(((2, 2), (2, 2)), table)
        assert not is_no_signaling(box)
        assert signaling_deviation(box) == pytest.approx(1.0)


class TestLocalPolytope:
    def test_deterministic_boxes_are_vertices(self):
        for box in deterministic_boxes():
            verdict = local_polytope_membership(box)
            assert isinstance(verdict, Local)
            (weight,) = [w for w in verdict.weights.values() if w > 1e-6]
            assert weight == pytest.approx(1.0)

    def test_random_local_mixtures(self):
        rng = np.random.default_rng(61)
        vertices = deterministic_boxes()
        for _ in range(25):
            weights = rng.dirichlet([0.7] * 16)
            table = sum(w * box.table for w, box in zip(weights, vertices))
            box = ConditionalBox(((2, 2), (2, 2)), table)
            verdict = local_polytope_membership(box)
            assert isinstance(verdict, Local)
            reproduced = sum(w * _strategy_table_oracle(s) for s, w in verdict.weights.items())
            assert np.abs(reproduced - box.table).max() < 1e-9

    def test_pr_box_certificate(self):
        verdict = local_polytope_membership(pr_box())
        assert isinstance(verdict, NonLocal)
        cert = verdict.certificate
        assert cert.gap > 1e-9
        assert cert.exact_gap > 0
        # the functional really separates: recompute both sides from scratch
        value_on_box = float((cert.coefficients * pr_box().table).sum())
        classical = max(float((cert.coefficients * _strategy_table_oracle(s)).sum())
                        for s in itertools.product(
                            itertools.product(range(2), repeat=2), repeat=2))
        assert value_on_box == pytest.approx(cert.box_value)
        assert classical == pytest.approx(cert.classical_bound)
        assert value_on_box - classical > 1e-9

    def test_budget(self):
        with pytest.raises(StrategyBudgetExceeded):
            local_polytope_membership(pr_box(), strategy_budget=3)


def _strategy_table_oracle(strategy):
    table = np.zeros((2, 2, 2, 2))
    f, g = strategy
    for x, y in np.ndindex(2, 2):
        table[x, y, f[x], g[y]] = 1.0
    return table


class TestDecides:
    def test_embedded_local_boxes_are_classical(self):
        rng = np.random.default_rng(67)
        vertices = deterministic_boxes()
        for box in vertices[:4]:
            p = embed_bell_to_p4(box, ([0.5, 0.5], [0.5, 0.5]))
            assert isinstance(decide_p4(p), Classical)
        for _ in range(5):
            weights = rng.dirichlet([1.0] * 16)
            table = sum(w * b.table for w, b in zip(weights, vertices))
            p = embed_bell_to_p4(ConditionalBox(((2, 2), (2, 2)), table),
                                 (rng.dirichlet([2, 2]), rng.dirichlet([2, 2])))
            assert isinstance(decide_p4(p), Classical)

    def test_pr_embedding_is_non_classical(self):
        p = embed_bell_to_p4(pr_box(), ([0.5, 0.5], [0.5, 0.5]))
        assert np.allclose(np.transpose(p.table, (1, 2, 0, 3)),
                           pr_box_correlation().table)
        verdict = decide_p4(p)
        assert isinstance(verdict, NonClassical)
        assert verdict.certificate.exact_gap > 0

    def test_quantum_chsh_box_is_non_classical(self):
        rng = np.random.default_rng(71)
        from corrscen.quantum import bell_quantum_p4_model, observable_basis, \
            maximally_entangled_state, shared_chsh_observables
        a0, a1 = shared_chsh_observables()
        bases = [observable_basis(a0), observable_basis(a1)]
        model = bell_quantum_p4_model(maximally_entangled_state(), bases, bases,
                                      [0.5, 0.5], [0.5, 0.5])
        p = evaluate_quantum(model)
        box, _ = box_from_correlation(p, ("x", "y"), ("a", "b"))
        assert chsh_value(box) == pytest.approx(2.5, abs=1e-9)
        verdict = decide_p4(p)
        assert isinstance(verdict, NonClassical)
        assert verdict.certificate.gap > 1e-9
        assert verdict.certificate.exact_gap > 0

    def test_deterministic_distribution_is_classical(self):
        table = np.zeros((2, 2, 2, 2))
        table[1, 0, 1, 1] = 1.0
        p = JointDistribution(("x", "a", "b", "y"), (2, 2, 2, 2), table)
        assert isinstance(decide_p4(p), Classical)

    def test_non_correlation_rejected(self):
        table = np.zeros((2, 2, 2, 2))
        table[0, 0, 0, 0] = table[1, 1, 1, 1] = 0.5
        p = JointDistribution(("x", "a", "b", "y"), (2, 2, 2, 2), table)
        with pytest.raises(NotACorrelation):
            decide_p4(p)

    def test_two_arm_matches_p4(self):
        rng = np.random.default_rng(73)
        vertices = deterministic_boxes()
        weights = rng.dirichlet([1.0] * 16)
        table = sum(w * b.table for w, b in zip(weights, vertices))
        box = ConditionalBox(((2, 2), (2, 2)), table)
        p4 = embed_bell_to_p4(box, ([0.5, 0.5], [0.5, 0.5]))
        from corrscen.bell import embed_box_to_multiarm
        ak = embed_box_to_multiarm(box, ([0.5, 0.5], [0.5, 0.5]))
        assert isinstance(decide_p4(p4), Classical)
        assert isinstance(decide_ak(ak, 2), Classical)

        pr4 = embed_bell_to_p4(pr_box(), ([0.5, 0.5], [0.5, 0.5]))
        prk = embed_box_to_multiarm(pr_box(), ([0.5, 0.5], [0.5, 0.5]))
        assert isinstance(decide_p4(pr4), NonClassical)
        assert isinstance(decide_ak(prk, 2), NonClassical)

    def test_three_arm_mermin_box(self):
        """Three-party box with GHZ-style parity constraints: no-signaling,
        uniform marginals, but outside the local polytope."""
        table = np.zeros((2, 2, 2, 2, 2, 2))  # (x,y,z,a,b,c)
        for x, y, z in np.ndindex(2, 2, 2):
            n_ones = x + y + z
            for a, b, c in np.ndindex(2, 2, 2):
                if n_ones in (0, 2):
                    # constrained rounds: parity of outcomes = 1 iff all settings 1
                    want = (x & y & z) ^ (1 if n_ones == 2 else 0)
                    table[x, y, z, a, b, c] = 0.25 if (a ^ b ^ c) == want else 0.0
                else:
                    table[x, y, z, a, b, c] = 0.125
        box = ConditionalBox(((2, 2), (2, 2), (2, 2)), table)
        assert is_no_signaling(box)
        from corrscen.bell import embed_box_to_multiarm
        p = embed_box_to_multiarm(box, ([0.5, 0.5],) * 3)
        verdict = decide_ak(p, 3)
        assert isinstance(verdict, NonClassical)
        assert verdict.certificate.exact_gap > 0

    def test_three_arm_local_model(self):
        rng = np.random.default_rng(79)
        # mixture of deterministic 3-party strategies
        parties = ((2, 2), (2, 2), (2, 2))
        functions = list(itertools.product(range(2), repeat=2))
        table = np.zeros((2, 2, 2, 2, 2, 2))
        strategies = list(itertools.product(functions, repeat=3))
        weights = rng.dirichlet([0.4] * len(strategies))
        for w, (f, g, h) in zip(weights, strategies):
            for x, y, z in np.ndindex(2, 2, 2):
                table[x, y, z, f[x], g[y], h[z]] += w
        box = ConditionalBox(parties, table)
        from corrscen.bell import embed_box_to_multiarm
        p = embed_box_to_multiarm(box, ([0.5, 0.5],) * 3)
        assert isinstance(decide_ak(p, 3), Classical)


class TestEmbedBell:
    def test_signaling_box_rejected(self):
        table = np.zeros((2, 2, 2, 2))
        for x, y in np.ndindex(2, 2):
            table[x, y, x, x] = 1.0
        with pytest.raises(SignalingBox):
            embed_bell_to_p4(ConditionalBox(((2, 2), (2, 2)), table),
                             ([0.5, 0.5], [0.5, 0.5]))

    def test_deterministic_box_embeds_deterministically(self):
        box = deterministic_boxes()[0]
        p = embed_bell_to_p4(box, ([0.4, 0.6], [0.3, 0.7]))
        # outputs are a function of the settings; only 4 tuples have mass
        assert (p.table > 1e-12).sum() == 4
        assert p.table[0, 0, 0, 0] == pytest.approx(0.4 * 0.3)


class TestBgpEmbedding:
    def classical_model(self, rng):
        return {
            "kind": "classical",
            "x_dist": rng.dirichlet([2, 2]).tolist(),
            "z_dist": rng.dirichlet([2, 2]).tolist(),
            "lambda1": rng.dirichlet([1.5, 1.5]).tolist(),
            "lambda2": rng.dirichlet([1.5, 1.5]).tolist(),
            "a_kernel": rng.dirichlet([1, 1], size=(2, 2)).tolist(),
            "b_kernel": rng.dirichlet([1, 1], size=(2, 2)).tolist(),
            "c_kernel": rng.dirichlet([1, 1], size=(2, 2)).tolist(),
        }

    def test_product_model_gives_product_correlation(self):
        model = {
            "kind": "classical",
            "x_dist": [0.5, 0.5], "z_dist": [0.5, 0.5],
            "lambda1": [1.0], "lambda2": [1.0],
            "a_kernel": [[[0.3, 0.7]], [[0.3, 0.7]]],
            "b_kernel": [[[0.5, 0.5]]],
            "c_kernel": [[[0.9, 0.1], [0.9, 0.1]]],
        }
        p = embed_bgp_to_p5(model)
        for pair in itertools.combinations("xabcz", 2):
            assert p.is_product([pair[0]], [pair[1]])

    def test_classical_embedding_matches_induced_model(self):
        rng = np.random.default_rng(83)
        for _ in range(5):
            model = self.classical_model(rng)
            p = embed_bgp_to_p5(model)
            induced = bgp_classical_to_p5_model(model)
            q = evaluate_classical(induced)
            assert np.abs(p.table - q.table).max() < 1e-12
            cards = dict(zip(p.names, p.cards))
            assert is_correlation(sized_p5(cards), p).is_correlation

    def test_entanglement_swapping(self):
        """Two maximally entangled pairs; the middle party measures in the
        Bell basis. The result satisfies all path factorizations."""
        bell_states = []
        for signs in ((1, 1), (1, -1)):
            for flip in (False, True):
                psi = np.zeros(4, dtype=complex)
                if not flip:
                    psi[0], psi[3] = 1.0, signs[1]
                else:
                    psi[1], psi[2] = 1.0, signs[1]
                psi /= np.linalg.norm(psi)
                bell_states.append(np.outer(psi, psi.conj()))
        pauli_z = np.array([[1, 0], [0, -1]], dtype=complex)
        pauli_x = np.array([[0, 1], [1, 0]], dtype=complex)

        def basis_of(obs):
            vals, vecs = np.linalg.eigh(obs)
            order = np.argsort(-vals)
            return [np.outer(vecs[:, i], vecs[:, i].conj()) for i in order]

        phi_plus = np.zeros(4, dtype=complex)
        phi_plus[0] = phi_plus[3] = 1 / np.sqrt(2)
        rho = np.outer(phi_plus, phi_plus.conj())
        model = {
            "kind": "quantum",
            "x_dist": [0.5, 0.5], "z_dist": [0.5, 0.5],
            "rho_ab": rho, "rho_bc": rho,
            "a_povms": [basis_of(pauli_z), basis_of(pauli_x)],
            "b_povm": bell_states,
            "c_povms": [basis_of(pauli_z), basis_of(pauli_x)],
        }
        p = embed_bgp_to_p5(model)
        assert float(p.table.sum()) == pytest.approx(1.0, abs=1e-10)
        cards = dict(zip(p.names, p.cards))
        report = is_correlation(sized_p5(cards), p)
        assert report.is_correlation
        # swapping works: given the Phi+ middle outcome, a and c agree in Z
        cond = p.condition({"b": 0, "x": 0, "z": 0})
        agree = float(cond.table[0, 0] + cond.table[1, 1])
        assert agree == pytest.approx(1.0, abs=1e-9)

    def test_malformed_input(self):
        with pytest.raises(MalformedBGPInput):
            embed_bgp_to_p5({"kind": "nonsense"})
        with pytest.raises(MalformedBGPInput):
            embed_bgp_to_p5({"kind": "classical", "x_dist": [1.0]})


class TestTimeReversal:
    def relabel_oracle(self, p):
        """Definitional loop: new (a,b,x,y) reads old (x,y,a,b)."""
        cards = {n: c for n, c in zip(p.names, p.cards)}
        base = np.transpose(p.table, [p.index[n] for n in ("x", "a", "b", "y")])
        out = np.zeros((cards["x"], cards["y"], cards["a"], cards["b"]))
        for i, j, k, l in np.ndindex(out.shape):
            out[i, j, k, l] = base[i, k, l, j]
        return out

    def test_matches_definition_and_stays_correlation(self):
        rng = np.random.default_rng(89)
        from corrscen.models import random_classical_model
        from corrscen.scenario import c4_scenario, p4_scenario
        for _ in range(10):
            m = random_classical_model(p4_scenario(), 2, rng=rng)
            p = evaluate_classical(m)
            q = time_reverse_relabel(p)
            assert np.abs(q.table - self.relabel_oracle(p)).max() < 1e-14
            assert is_correlation(c4_scenario(), q).is_correlation

    def test_symmetric_distribution_is_fixed_point(self):
        table = np.full((2, 2, 2, 2), 1.0 / 16.0)
        p = JointDistribution(("x", "a", "b", "y"), (2, 2, 2, 2), table)
        q = time_reverse_relabel(p)
        assert np.allclose(q.table, table)

    def test_product_correlation_relabels_to_no_signaling_box(self):
        margs = [np.array([0.3, 0.7]), np.array([0.6, 0.4]),
                 np.array([0.2, 0.8]), np.array([0.5, 0.5])]
        table = np.einsum("x,a,b,y->xaby", *margs)
        p = JointDistribution(("x", "a", "b", "y"), (2, 2, 2, 2), table)
        q = time_reverse_relabel(p)
        box, _ = box_from_correlation(q, ("x", "y"), ("a", "b"))
        assert is_no_signaling(box)

    def test_non_correlation_rejected(self):
        table = np.zeros((2, 2, 2, 2))
        table[0, 0, 0, 0] = table[1, 1, 1, 1] = 0.5
        p = JointDistribution(("x", "a", "b", "y"), (2, 2, 2, 2), table)
        with pytest.raises(NotACorrelation):
            time_reverse_relabel(p)
