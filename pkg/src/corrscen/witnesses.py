"""Non-classicality witnesses: entropic bounds, perfect-correlation CHSH
leverage on the triangle, and possibilistic contradiction chains on the square.

Every witness is one-sided: NonClassical verdicts are certificates,
Consistent only means the tested necessary condition holds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .bell import ConditionalBox, Local, local_polytope_membership
from .correlation import is_correlation
from .dist import JointDistribution
from .errors import ShapeMismatch
from .quantum import chsh_value
from .scenario import Scenario

#: entropies amplify rounding, so entropic verdicts use a looser tolerance
ENTROPIC_TOL = 1e-7
#: a "perfect" correlation may fail with at most this probability
PERFECT_TOL = 1e-9
#: CHSH violations below this slack are considered numerical noise
CHSH_TOL = 1e-7


@dataclass(frozen=True)
class WitnessReport:
    """verdict is "NonClassical", "Consistent" or "Inconclusive".

    slack is how far past the bound the witness value lies (verdict-bearing
    only for NonClassical). details carries the certifying data: the violated
    inequality, the deduction chain, or the reason for inconclusiveness.
    """

    verdict: str
    kind: str
    slack: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def non_classical(self) -> bool:
        return self.verdict == "NonClassical"


# ---------------------------------------------------------------------------
# entropic witnesses on three variables

def entropic_triangle_witness(p: JointDistribution) -> tuple[WitnessReport, WitnessReport, WitnessReport]:
    """Evaluate the three entropic bounds every pairwise-source model obeys.

    For distributions producible with only pairwise common ancestors:
      (1) I(a:b) + I(a:c) <= H(a)        for every pivot choice,
      (2) H(a)+H(b)+H(c) <= H(ab)+H(ac)  the same bound in joint entropies,
      (3) H(a)+H(b)+H(c) <= 2 H(abc)     the weaker triple-entropy bound.
    A violation of (1) or (2) witnesses that some ancestor influences all
    three variables; (2) fires in strictly more cases than (3).
    """
    if len(p.names) != 3:
        raise ShapeMismatch(f"need exactly 3 variables, got {p.names}")
    a, b, c = p.names
    h = {}
    for subset in itertools.chain.from_iterable(
            itertools.combinations(p.names, r) for r in (1, 2, 3)):
        h[frozenset(subset)] = p.entropy(subset)

    def H(*names):
        return h[frozenset(names)]

    mi_reports = []
    joint_reports = []
    for pivot, u, w in ((a, b, c), (b, a, c), (c, a, b)):
        mi_reports.append(
            (pivot, p.mutual_information([pivot], [u]) + p.mutual_information([pivot], [w])
             - H(pivot)))
        joint_reports.append(
            (pivot, H(a) + H(b) + H(c) - H(pivot, u) - H(pivot, w)))

    def best(entries, kind, extra=()):
        pivot, violation = max(entries, key=lambda e: e[1])
        if violation > ENTROPIC_TOL:
            details = {"pivot": pivot, "inequality": kind}
            details.update(extra)
            return WitnessReport("NonClassical", kind, slack=float(violation),
                                 details=details)
        return WitnessReport("Consistent", kind, slack=float(violation))

    ancestor_note = {"implies": "a common ancestor of all three variables is required"}
    mutual_info = best(mi_reports, "mutual-information-monogamy", ancestor_note)
    joint = best(joint_reports, "pairwise-joint-entropy", ancestor_note)
    triple = H(a) + H(b) + H(c) - 2.0 * H(a, b, c)
    if triple > ENTROPIC_TOL:
        steudel_ay = WitnessReport("NonClassical", "triple-joint-entropy",
                                   slack=float(triple), details=dict(ancestor_note))
    else:
        steudel_ay = WitnessReport("Consistent", "triple-joint-entropy", slack=float(triple))
    return mutual_info, joint, steudel_ay


# ---------------------------------------------------------------------------
# perfect-correlation CHSH witness on the triangle

def monogamy_chsh_witness(p: JointDistribution,
                          projections: dict | None = None) -> WitnessReport:
    """Conditional CHSH witness for triangle distributions with paired outcomes.

    Looks for binary projections f_a, f_b of the first two variables and a
    pairing (g1, g2) of the third variable's two bits such that f_a(a) = g1(c)
    and f_b(b) = g2(c) with certainty. Perfect correlation with c forces those
    bits to be independent of the a-b source in any hidden-variable model, so
    they act as free measurement choices; if the remaining bits conditioned
    on them violate the CHSH bound, no such model exists.

    projections may supply {"f_a": ..., "f_b": ..., "g1": ..., "g2": ...} as
    callables int -> {0,1}; by default all coordinate projections of 4-outcome
    variables are tried.
    """
    if len(p.names) != 3:
        raise ShapeMismatch(f"need exactly 3 variables, got {p.names}")
    if any(c != 4 for c in p.cards):
        raise ShapeMismatch("the paired-outcome witness needs 4 outcomes per variable")

    hi = lambda v: v // 2
    lo = lambda v: v % 2
    if projections is not None:
        candidates = [(projections["f_a"], projections["f_b"],
                       projections["g1"], projections["g2"])]
    else:
        candidates = [(fa, fb, g1, g2)
                      for fa in (hi, lo) for fb in (hi, lo)
                      for g1, g2 in ((hi, lo), (lo, hi))]

    table = p.to_float().table
    best_failure = 1.0
    for f_a, f_b, g1, g2 in candidates:
        miss_a = sum(table[va, vb, vc] for va, vb, vc in np.ndindex(4, 4, 4)
                     if f_a(va) != g1(vc))
        miss_b = sum(table[va, vb, vc] for va, vb, vc in np.ndindex(4, 4, 4)
                     if f_b(vb) != g2(vc))
        best_failure = min(best_failure, max(miss_a, miss_b))
        if miss_a > PERFECT_TOL or miss_b > PERFECT_TOL:
            continue
        # condition the complementary bits on the perfectly shared ones
        other_a = lo if f_a is hi else hi
        other_b = lo if f_b is hi else hi
        box_table = np.zeros((2, 2, 2, 2))
        for va, vb in np.ndindex(4, 4):
            weight = float(table[va, vb].sum())
            box_table[f_a(va), f_b(vb), other_a(va), other_b(vb)] += weight
        setting_mass = box_table.sum(axis=(2, 3))
        if setting_mass.min() <= PERFECT_TOL:
            continue  # some choice combination never occurs; cannot condition
        box_table /= setting_mass[:, :, None, None]
        box = ConditionalBox(((2, 2), (2, 2)), box_table, p.eps)
        value = chsh_value(box)
        details = {
            "chsh": value,
            "projections": {"f_a": "hi" if f_a is hi else "lo",
                            "f_b": "hi" if f_b is hi else "lo",
                            "g1": "hi" if g1 is hi else "lo",
                            "g2": "hi" if g2 is hi else "lo"},
        }
        if value > 2.0 + CHSH_TOL:
            return WitnessReport("NonClassical", "perfect-correlation-chsh",
                                 slack=float(value - 2.0), details=details)
        return WitnessReport("Consistent", "perfect-correlation-chsh",
                             slack=float(value - 2.0), details=details)
    return WitnessReport(
        "Inconclusive", "perfect-correlation-chsh",
        details={"reason": "MissingDecomposition",
                 "message": "no pair of coordinate projections is perfectly "
                            f"correlated (best failure probability {best_failure:.3g})"})


# ---------------------------------------------------------------------------
# possibilistic contradiction chains on the square scenario

def hardy_c4_witness(p: JointDistribution, scenario: Scenario | None = None,
                     max_rounds: int = 6) -> WitnessReport:
    """Support-based contradiction finder for square-scenario distributions.

    In a deterministic model with independent sources, any two hidden-value
    combinations may be recombined source by source, and the recombination's
    outcome tuple must again lie in the support. Seeding the argument with
    two support tuples and propagating forced outcomes (coordinates pinned
    because every support completion agrees) either derives a recombination
    whose outcome lies outside the support -- a contradiction no classical
    model survives -- or reaches a fixpoint (Consistent: necessary condition
    only).

    Works on the square scenario with binary outcomes; the deduction is
    relabeling-invariant because seeds range over all ordered support pairs.
    """
    from .scenario import c4_scenario

    if scenario is None:
        scenario = c4_scenario()
    if set(p.names) != set(scenario.measurement_names):
        raise ShapeMismatch(f"expected variables {scenario.measurement_names}")
    if any(c != 2 for c in p.cards):
        raise ShapeMismatch("the contradiction search is implemented for binary outcomes")
    report = is_correlation(scenario, p)
    if not report.is_correlation:
        raise ShapeMismatch("distribution is not a correlation on the square scenario")

    order = [p.index[n] for n in scenario.measurement_names]
    table = np.transpose(p.to_float().table, order)
    support = sorted(tuple(int(i) for i in ix)
                     for ix in np.argwhere(table > p.eps))
    support_set = set(support)
    n_meas = len(scenario.measurements)
    adj = scenario.sources_of_measurement
    n_src = len(scenario.sources)

    for s1, s2 in itertools.permutations(support, 2):
        chain = _contradiction_chain(scenario, support_set, s1, s2,
                                     n_meas, n_src, adj, max_rounds)
        if chain is not None:
            return WitnessReport(
                "NonClassical", "support-recombination", slack=None,
                details={"seed_1": s1, "seed_2": s2, "chain": chain})
    return WitnessReport("Consistent", "support-recombination",
                         details={"support_size": len(support)})


def _contradiction_chain(scenario, support, s1, s2, n_meas, n_src, adj, max_rounds):
    """Fixpoint deduction over the 2^#sources recombinations of two seeds.

    known[(v, pattern_v)] = forced outcome of measurement v when its adjacent
    sources take the seed mix given by pattern_v (a tuple of 0/1 seed tags).
    """
    names = scenario.measurement_names
    known = {}
    for v in range(n_meas):
        known[(v, (0,) * len(adj[v]))] = s1[v]
        known[(v, (1,) * len(adj[v]))] = s2[v]
    chain = []
    patterns = list(itertools.product((0, 1), repeat=n_src))

    for _ in range(max_rounds):
        progress = False
        for pattern in patterns:
            cells = [(v, tuple(pattern[e] for e in adj[v])) for v in range(n_meas)]
            outcome = [known.get(cell) for cell in cells]
            unknown = [v for v in range(n_meas) if outcome[v] is None]
            completions = [t for t in support
                           if all(t[v] == outcome[v] for v in range(n_meas)
                                  if outcome[v] is not None)]
            mix = {scenario.source_names[e]: ("seed1", "seed2")[pattern[e]]
                   for e in range(n_src)}
            if not completions:
                chain.append({
                    "recombination": mix,
                    "forced_outcome": {names[v]: outcome[v] for v in range(n_meas)
                                       if outcome[v] is not None},
                    "conclusion": "outcome forced outside the support: contradiction",
                })
                return chain
            if not unknown:
                continue
            for v in unknown:
                values = {t[v] for t in completions}
                if len(values) == 1:
                    value = values.pop()
                    known[cells[v]] = value
                    progress = True
                    chain.append({
                        "recombination": mix,
                        "known_before": {names[u]: outcome[u] for u in range(n_meas)
                                         if outcome[u] is not None},
                        "deduced": {names[v]: value},
                        "reason": "unique completion within the support",
                    })
        if not progress:
            return None
    return None
