"""Conditional boxes, the local polytope, and scenario <-> Bell embeddings.

A path-shaped scenario x - a - b - y is equivalent to a bipartite Bell
scenario: the end measurements play the role of settings. The conversions
here move between the joint-distribution picture (unconditional, with
explicit setting distributions) and the conditional-box picture, and decide
membership in the local polytope by linear programming with verifiable
certificates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .correlation import is_correlation
from .dist import JointDistribution
from .errors import (
    EmptySettingSupport,
    MalformedBGPInput,
    NotACorrelation,
    ShapeMismatch,
    SignalingBox,
    StrategyBudgetExceeded,
)
from .lp import Feasible, Infeasible, as_exact_array, solve_lp
from .scenario import Scenario, c4_scenario, multiarm_scenario, p4_scenario, p5_scenario


@dataclass(frozen=True)
class ConditionalBox:
    """k-partite conditional distribution p(outcomes | settings).

    parties lists (settings count, outcomes count) per party. table has
    shape (s_1, ..., s_k, o_1, ..., o_k), settings-major. setting_values
    records, per party, which original values the settings enumerate (used
    when zero-probability settings were dropped while conditioning).
    """

    parties: tuple[tuple[int, int], ...]
    table: np.ndarray
    eps: float = 1e-9
    setting_values: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        shape = tuple(s for s, _ in self.parties) + tuple(o for _, o in self.parties)
        table = np.asarray(self.table, dtype=float)
        if table.shape != shape:
            raise ShapeMismatch(f"box table shape {table.shape}, expected {shape}")
        k = len(self.parties)
        sums = table.sum(axis=tuple(range(k, 2 * k)))
        if np.abs(sums - 1.0).max() > self.eps or table.min() < -self.eps:
            raise ShapeMismatch("box table is not a family of normalized conditionals")
        table = np.clip(table, 0.0, None)
        table.flags.writeable = False
        object.__setattr__(self, "table", table)

    @property
    def n_parties(self) -> int:
        return len(self.parties)


def pr_box() -> ConditionalBox:
    """The extremal no-signaling box: a XOR b = x AND y, uniform outcomes."""
    table = np.zeros((2, 2, 2, 2))
    for x, y, a, b in np.ndindex(2, 2, 2, 2):
        if a ^ b == x & y:
            table[x, y, a, b] = 0.5
    return ConditionalBox(((2, 2), (2, 2)), table)


def deterministic_boxes():
    """All 16 deterministic 2-setting/2-outcome bipartite boxes."""
    boxes = []
    functions = list(itertools.product(range(2), repeat=2))  # f(0), f(1)
    for f, g in itertools.product(functions, repeat=2):
        table = np.zeros((2, 2, 2, 2))
        for x, y in np.ndindex(2, 2):
            table[x, y, f[x], g[y]] = 1.0
        boxes.append(ConditionalBox(((2, 2), (2, 2)), table))
    return boxes


# ---------------------------------------------------------------------------
# correlation <-> box conversions

def box_from_correlation(p: JointDistribution, inputs, outputs):
    """Condition a joint distribution into a box, party i = (inputs[i], outputs[i]).

    Input values of zero probability are dropped from the setting sets (the
    box's setting_values records the kept values). Every *combination* of
    kept settings must still have positive probability, otherwise the
    conditional is undefined and EmptySettingSupport is raised. Returns
    (box, input marginal) with the marginal over the original input values.
    """
    inputs, outputs = tuple(inputs), tuple(outputs)
    if len(inputs) != len(outputs) or not inputs:
        raise ShapeMismatch("need one input and one output variable per party")
    in_marginal = p.marginalize(inputs).to_float()
    kept = []
    for name in inputs:
        m = p.marginalize([name]).to_float().table
        values = tuple(int(v) for v in np.nonzero(m > p.eps)[0])
        if not values:
            raise EmptySettingSupport(f"input {name!r} has no value of positive probability")
        kept.append(values)

    out_cards = tuple(p.cards[p.index[n]] for n in outputs)
    parties = tuple((len(kept[i]), out_cards[i]) for i in range(len(inputs)))
    table = np.zeros(tuple(len(v) for v in kept) + out_cards)
    pf = p.to_float()
    for setting_idx in itertools.product(*(range(len(v)) for v in kept)):
        given = {name: kept[i][setting_idx[i]] for i, name in enumerate(inputs)}
        joint_prob = float(in_marginal.table[tuple(
            given[n] for n in in_marginal.names)])
        if joint_prob <= p.eps:
            raise EmptySettingSupport(
                f"setting combination {given} has zero probability; "
                "the conditional box is undefined there")
        cond = pf.condition(given).marginalize(outputs)
        # reorder to the outputs order given by the caller
        perm = [cond.index[n] for n in outputs]
        table[setting_idx] = np.transpose(cond.table, perm)
    box = ConditionalBox(parties, table, p.eps, tuple(kept))
    return box, in_marginal


def is_no_signaling(b: ConditionalBox) -> bool:
    """Marginals of every party group must not depend on the others' settings."""
    return signaling_deviation(b) <= b.eps


def signaling_deviation(b: ConditionalBox) -> float:
    """Largest marginal shift obtainable by changing another party's setting."""
    k = b.n_parties
    worst = 0.0
    for group_size in range(1, k):
        for group in itertools.combinations(range(k), group_size):
            drop_axes = tuple(k + i for i in range(k) if i not in group)
            marg = b.table.sum(axis=drop_axes)  # (settings..., outcomes_group...)
            for i in range(k):
                if i in group:
                    continue
                ref = marg.take(0, axis=i)
                for v in range(1, b.parties[i][0]):
                    worst = max(worst, float(np.abs(marg.take(v, axis=i) - ref).max()))
    return worst


def embed_bell_to_p4(box: ConditionalBox, input_dists) -> JointDistribution:
    """Joint distribution p(x,a,b,y) = p(x) p(y) p(a,b | x,y) on the path scenario.

    The box must be bipartite and no-signaling, and the setting distributions
    must have full support (so the box is recoverable by conditioning).
    """
    if box.n_parties != 2:
        raise ShapeMismatch("path embedding needs a bipartite box")
    if not is_no_signaling(box):
        raise SignalingBox("cannot embed a signaling box: the result would "
                           "violate the scenario's factorizations")
    px, py = (np.asarray(d, dtype=float) for d in input_dists)
    (s1, o1), (s2, o2) = box.parties
    if px.shape != (s1,) or py.shape != (s2,):
        raise ShapeMismatch("input distributions do not match the box's setting counts")
    if px.min() <= 0 or py.min() <= 0:
        raise EmptySettingSupport("input distributions must have full support")
    table = np.einsum("x,y,xyab->xaby", px, py, box.table)
    return JointDistribution(("x", "a", "b", "y"), (s1, o1, o2, s2), table, box.eps)


def embed_box_to_multiarm(box: ConditionalBox, input_dists) -> JointDistribution:
    """k-partite generalization: p(a..., x...) = prod p(x_i) * p(a|x)."""
    if not is_no_signaling(box):
        raise SignalingBox("cannot embed a signaling box")
    k = box.n_parties
    dists = [np.asarray(d, dtype=float) for d in input_dists]
    for i, d in enumerate(dists):
        if d.shape != (box.parties[i][0],):
            raise ShapeMismatch(f"input distribution {i} has wrong length")
        if d.min() <= 0:
            raise EmptySettingSupport("input distributions must have full support")
    letters_s = [chr(ord("A") + i) for i in range(k)]
    # joint[a..., x...] = prod_i p(x_i) * box[x..., a...]
    spec = ",".join(letters_s) + "," + "".join(letters_s) + "".join(
        chr(ord("a") + i) for i in range(k))
    spec += "->" + "".join(chr(ord("a") + i) for i in range(k)) + "".join(letters_s)
    table = np.einsum(spec, *dists, box.table)
    names = tuple(f"a{i+1}" for i in range(k)) + tuple(f"x{i+1}" for i in range(k))
    cards = tuple(o for _, o in box.parties) + tuple(s for s, _ in box.parties)
    return JointDistribution(names, cards, table, box.eps)


# ---------------------------------------------------------------------------
# local polytope membership

@dataclass(frozen=True)
class BellCertificate:
    """A linear functional separating a box from the local polytope.

    coefficients has the box's table shape; value(q) = sum coefficients * q.
    classical_bound is the maximum over all deterministic strategies, so
    value(box) > classical_bound certifies non-locality. exact_gap is the
    certificate's slack re-evaluated in exact rational arithmetic.
    """

    coefficients: np.ndarray
    classical_bound: float
    box_value: float
    exact_gap: Fraction

    @property
    def gap(self) -> float:
        return self.box_value - self.classical_bound


@dataclass(frozen=True)
class Local:
    weights: dict[tuple, float]  # deterministic strategy -> weight


@dataclass(frozen=True)
class NonLocal:
    certificate: BellCertificate


def _strategies(parties):
    """Deterministic strategies: per party, a tuple of outcomes per setting."""
    per_party = []
    for settings, outcomes in parties:
        per_party.append(list(itertools.product(range(outcomes), repeat=settings)))
    return list(itertools.product(*per_party))


def _strategy_table(parties, strategy):
    shape = tuple(s for s, _ in parties) + tuple(o for _, o in parties)
    table = np.zeros(shape)
    setting_ranges = [range(s) for s, _ in parties]
    for x in itertools.product(*setting_ranges):
        a = tuple(strategy[i][x[i]] for i in range(len(parties)))
        table[x + a] = 1.0
    return table


def local_polytope_membership(b: ConditionalBox, strategy_budget: int = 20000):
    """Decide membership of a box in the local polytope by LP feasibility.

    Local boxes come with convex weights over deterministic strategies that
    reproduce the table within 1e-9. Non-local boxes come with a separating
    functional whose classical bound is re-verified exactly over every
    deterministic strategy (the slack is certified in rational arithmetic).
    """
    n_strategies = 1
    for settings, outcomes in b.parties:
        n_strategies *= outcomes ** settings
    if n_strategies > strategy_budget:
        raise StrategyBudgetExceeded(
            f"{n_strategies} deterministic strategies exceed the budget {strategy_budget}")

    strategies = _strategies(b.parties)
    columns = np.stack([_strategy_table(b.parties, s).reshape(-1) for s in strategies],
                       axis=1)
    n_rows = columns.shape[0]
    A = np.vstack([columns, np.ones((1, len(strategies)))])
    rhs = np.concatenate([b.table.reshape(-1), [1.0]])

    result = solve_lp(A, rhs)
    if isinstance(result, Feasible):
        weights = {strategies[j]: float(result.x[j])
                   for j in range(len(strategies)) if result.x[j] > 1e-12}
        reproduced = columns @ result.x
        if np.abs(reproduced - b.table.reshape(-1)).max() > 1e-9:
            raise AssertionError("local weights fail to reproduce the box")  # pragma: no cover
        return Local(weights)

    y = result.farkas
    coefficients = np.asarray(y[:n_rows], dtype=float).reshape(b.table.shape)
    values = coefficients.reshape(-1) @ columns
    classical_bound = float(values.max())
    box_value = float(coefficients.reshape(-1) @ b.table.reshape(-1))

    # exact re-verification: floats are dyadic rationals, so this is lossless
    y_exact = as_exact_array(coefficients.reshape(-1))
    box_exact = as_exact_array(b.table.reshape(-1))
    cols_exact = as_exact_array(columns)
    exact_values = [sum(y_exact[i] * cols_exact[i, j] for i in range(n_rows))
                    for j in range(len(strategies))]
    exact_bound = max(exact_values)
    exact_value = sum(y_exact[i] * box_exact[i] for i in range(n_rows))
    certificate = BellCertificate(coefficients, classical_bound, box_value,
                                  exact_gap=exact_value - exact_bound)
    if certificate.exact_gap <= 0:
        # numerically marginal: retry in exact arithmetic end to end
        exact_result = solve_lp(as_exact_array(A), as_exact_array(rhs), exact=True)
        if isinstance(exact_result, Feasible):
            weights = {strategies[j]: float(exact_result.x[j])
                       for j in range(len(strategies)) if exact_result.x[j] > 0}
            return Local(weights)
        y = exact_result.farkas
        coefficients = y[:n_rows].reshape(b.table.shape)
        exact_values = [sum(y[i] * cols_exact[i, j] for i in range(n_rows))
                        for j in range(len(strategies))]
        exact_bound = max(exact_values)
        exact_value = sum(y[i] * box_exact[i] for i in range(n_rows))
        certificate = BellCertificate(coefficients.astype(float),
                                      float(exact_bound), float(exact_value),
                                      exact_gap=exact_value - exact_bound)
    return NonLocal(certificate)


# ---------------------------------------------------------------------------
# classicality decisions via the Bell equivalence

@dataclass(frozen=True)
class Classical:
    weights: dict
    box: ConditionalBox


@dataclass(frozen=True)
class NonClassical:
    certificate: BellCertificate
    box: ConditionalBox


def decide_p4(p: JointDistribution, strategy_budget: int = 20000):
    """Classicality of a correlation on the path scenario x - a - b - y.

    Equivalent to Bell locality of the conditional box p(a,b|x,y): a local
    model converts into hidden variables for the three sources (the end
    sources simply carry the settings), and conversely.
    """
    return _decide_via_box(p, ("x", "y"), ("a", "b"), _p4_like(p), strategy_budget)


def decide_ak(p: JointDistribution, k: int, strategy_budget: int = 20000):
    """Classicality on the k-arm scenario: Bell locality of p(a_1..a_k|x_1..x_k)."""
    inputs = tuple(f"x{i+1}" for i in range(k))
    outputs = tuple(f"a{i+1}" for i in range(k))
    expected = set(inputs) | set(outputs)
    if set(p.names) != expected:
        raise NotACorrelation(f"expected variables {sorted(expected)}")
    return _decide_via_box(p, inputs, outputs, _multiarm_like(p, k), strategy_budget)


def _p4_like(p: JointDistribution) -> Scenario:
    cards = {n: c for n, c in zip(p.names, p.cards)}
    missing = {"x", "a", "b", "y"} - set(cards)
    if missing:
        raise NotACorrelation(f"path-scenario distribution lacks variables {missing}")
    return _sized_p4(cards)


def _sized_p4(cards):
    from .scenario import validate_scenario
    return validate_scenario({
        "measurements": [{"name": "x", "outcomes": cards["x"]},
                         {"name": "a", "outcomes": cards["a"]},
                         {"name": "b", "outcomes": cards["b"]},
                         {"name": "y", "outcomes": cards["y"]}],
        "sources": [{"name": "XA", "connects": ["x", "a"]},
                    {"name": "AB", "connects": ["a", "b"]},
                    {"name": "BY", "connects": ["b", "y"]}],
    })


def _multiarm_like(p: JointDistribution, k: int) -> Scenario:
    from .scenario import validate_scenario
    cards = {n: c for n, c in zip(p.names, p.cards)}
    return validate_scenario({
        "measurements": [{"name": n, "outcomes": cards[n]} for n in
                         [f"a{i+1}" for i in range(k)] + [f"x{i+1}" for i in range(k)]],
        "sources": [{"name": "CENTER", "connects": [f"a{i+1}" for i in range(k)]}] +
                   [{"name": f"ARM{i+1}", "connects": [f"a{i+1}", f"x{i+1}"]}
                    for i in range(k)],
    })


def _decide_via_box(p, inputs, outputs, scenario, strategy_budget):
    report = is_correlation(scenario, p)
    if not report.is_correlation:
        raise NotACorrelation(
            f"distribution violates {len(report.violations)} factorization constraint(s)")
    box, _ = box_from_correlation(p, inputs, outputs)
    verdict = local_polytope_membership(box, strategy_budget)
    if isinstance(verdict, Local):
        return Classical(verdict.weights, box)
    return NonClassical(verdict.certificate, box)


# ---------------------------------------------------------------------------
# bilocality-shaped inputs embedded into the 5-path

def embed_bgp_to_p5(model: dict) -> JointDistribution:
    """Embed a two-source three-party (bilocality-style) model into the
    5-measurement path x - a - b - c - z.

    The end measurements announce the settings; their sources carry the
    setting values. Classical form:
      {"kind": "classical", "x_dist", "z_dist", "lambda1", "lambda2",
       "a_kernel" [x, l1, a], "b_kernel" [l1, l2, b], "c_kernel" [l2, z, c]}
    Quantum form:
      {"kind": "quantum", "x_dist", "z_dist", "rho_ab", "rho_bc",
       "a_povms" [x][a] on the left factor of rho_ab,
       "b_povm" [b] on (right of rho_ab) x (left of rho_bc),
       "c_povms" [z][c] on the right factor of rho_bc}
    """
    kind = model.get("kind")
    if kind == "classical":
        return _embed_bgp_classical(model)
    if kind == "quantum":
        return _embed_bgp_quantum(model)
    raise MalformedBGPInput(f"unknown model kind {kind!r}")


def _embed_bgp_classical(model):
    try:
        px = np.asarray(model["x_dist"], dtype=float)
        pz = np.asarray(model["z_dist"], dtype=float)
        l1 = np.asarray(model["lambda1"], dtype=float)
        l2 = np.asarray(model["lambda2"], dtype=float)
        ka = np.asarray(model["a_kernel"], dtype=float)
        kb = np.asarray(model["b_kernel"], dtype=float)
        kc = np.asarray(model["c_kernel"], dtype=float)
    except (KeyError, ValueError) as err:
        raise MalformedBGPInput(str(err)) from err
    if ka.shape[:2] != (len(px), len(l1)) or kb.shape[:2] != (len(l1), len(l2)) \
            or kc.shape[:2] != (len(l2), len(pz)):
        raise MalformedBGPInput("kernel shapes do not match the hidden/setting sizes")
    for arr, what in ((px, "x_dist"), (pz, "z_dist"), (l1, "lambda1"), (l2, "lambda2")):
        if abs(arr.sum() - 1.0) > 1e-9 or arr.min() < 0:
            raise MalformedBGPInput(f"{what} is not a probability vector")
    table = np.einsum("x,z,m,n,xma,mnb,nzc->xabcz", px, pz, l1, l2, ka, kb, kc)
    names = ("x", "a", "b", "c", "z")
    cards = (len(px), ka.shape[2], kb.shape[2], kc.shape[2], len(pz))
    return JointDistribution(names, cards, table)


def bgp_classical_to_p5_model(model: dict):
    """The induced hidden-variable model on the 5-path (for cross-checks)."""
    from .models import ClassicalModel
    from .scenario import validate_scenario

    p = _embed_bgp_classical(model)  # validates shapes
    px = np.asarray(model["x_dist"], dtype=float)
    pz = np.asarray(model["z_dist"], dtype=float)
    l1 = np.asarray(model["lambda1"], dtype=float)
    l2 = np.asarray(model["lambda2"], dtype=float)
    ka = np.asarray(model["a_kernel"], dtype=float)
    kb = np.asarray(model["b_kernel"], dtype=float)
    kc = np.asarray(model["c_kernel"], dtype=float)
    cards = dict(zip(p.names, p.cards))
    scenario = validate_scenario({
        "measurements": [{"name": n, "outcomes": cards[n]} for n in ("x", "a", "b", "c", "z")],
        "sources": [{"name": "XA", "connects": ["x", "a"]},
                    {"name": "AB", "connects": ["a", "b"]},
                    {"name": "BC", "connects": ["b", "c"]},
                    {"name": "CZ", "connects": ["c", "z"]}],
    })
    eye_x = np.eye(len(px))
    eye_z = np.eye(len(pz))
    # kernel axis order per measurement: x: (XA), a: (XA, AB), b: (AB, BC),
    # c: (BC, CZ), z: (CZ) -- matching the given kernels directly
    return ClassicalModel(
        scenario,
        (px, l1, l2, pz),
        (eye_x, ka, kb, kc, eye_z),
    )


def _embed_bgp_quantum(model):
    try:
        px = np.asarray(model["x_dist"], dtype=float)
        pz = np.asarray(model["z_dist"], dtype=float)
        rho_ab = np.asarray(model["rho_ab"], dtype=complex)
        rho_bc = np.asarray(model["rho_bc"], dtype=complex)
        a_povms = [np.asarray(povm, dtype=complex) for povm in model["a_povms"]]
        b_povm = np.asarray(model["b_povm"], dtype=complex)
        c_povms = [np.asarray(povm, dtype=complex) for povm in model["c_povms"]]
    except (KeyError, ValueError) as err:
        raise MalformedBGPInput(str(err)) from err
    if len(a_povms) != len(px) or len(c_povms) != len(pz):
        raise MalformedBGPInput("one POVM per setting value is required")
    d_a_out = a_povms[0].shape[0]
    d_b_out = b_povm.shape[0]
    d_c_out = c_povms[0].shape[0]
    dA = a_povms[0].shape[1]
    dC = c_povms[0].shape[1]
    if rho_ab.shape[0] % dA != 0 or rho_bc.shape[0] % dC != 0:
        raise MalformedBGPInput("state dimensions incompatible with the POVMs")
    dB1 = rho_ab.shape[0] // dA
    dB2 = rho_bc.shape[0] // dC
    if b_povm.shape[1] != dB1 * dB2:
        raise MalformedBGPInput("middle POVM dimension must match both states")

    r1 = rho_ab.reshape(dA, dB1, dA, dB1)
    r2 = rho_bc.reshape(dB2, dC, dB2, dC)
    table = np.zeros((len(px), d_a_out, d_b_out, d_c_out, len(pz)))
    bt = b_povm.reshape(d_b_out, dB1, dB2, dB1, dB2)
    for x in range(len(px)):
        at = a_povms[x].reshape(d_a_out, dA, dA)
        for z in range(len(pz)):
            ct = c_povms[z].reshape(d_c_out, dC, dC)
            # tr[(rho_ab x rho_bc)(A^x_a x B_b x C^z_c)]: states indexed
            # [rows; cols], operators contribute [cols; rows]
            val = np.einsum("ijkl,mnop,aki,blojm,cpn->abc",
                            r1, r2, at, bt, ct)
            probs = np.real(val)
            table[x, :, :, :, z] = probs * px[x] * pz[z]
    names = ("x", "a", "b", "c", "z")
    cards = (len(px), d_a_out, d_b_out, d_c_out, len(pz))
    return JointDistribution(names, cards, table)


# ---------------------------------------------------------------------------
# time reversal

def time_reverse_relabel(p: JointDistribution) -> JointDistribution:
    """Swap the roles a <-> x and b <-> y of a path-scenario correlation.

    The result is a valid correlation on the square scenario (and classical
    there whenever the input was classical on the path), but its conditional
    box p(a,b|x,y) may be signaling: conditioning is time-asymmetric.
    """
    if set(p.names) != {"x", "a", "b", "y"}:
        raise NotACorrelation("expected variables x, a, b, y")
    cards = {n: c for n, c in zip(p.names, p.cards)}
    report = is_correlation(_sized_p4(cards), p)
    if not report.is_correlation:
        raise NotACorrelation("input is not a correlation on the path scenario")
    pf = p.to_float()
    # align axes to (x, a, b, y) first
    perm = [pf.index[n] for n in ("x", "a", "b", "y")]
    base = np.transpose(pf.table, perm)
    # new (a, b, x, y) = old (x, y, a, b)
    table = np.transpose(base, (0, 3, 1, 2))
    names = ("a", "b", "x", "y")
    new_cards = (cards["x"], cards["y"], cards["a"], cards["b"])
    return JointDistribution(names, new_cards, table, p.eps)
