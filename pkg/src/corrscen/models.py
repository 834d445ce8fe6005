"""Finite classical hidden-variable models over a scenario.

A model attaches to every source an independent finite hidden variable and
to every measurement a response kernel depending only on the hidden values
of its adjacent sources. Models come in two arithmetic flavors: float64 for
search and fitting, exact fractions (object arrays) for certificates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from string import ascii_letters
from typing import Sequence

import numpy as np

from .correlation import is_correlation
from .dist import JointDistribution
from .errors import (
    InvalidDistribution,
    IrrationalKernel,
    NotACorrelation,
    NotStarForest,
    ResourceLimit,
    ScenarioMismatch,
    VariableMismatch,
)
from .scenario import Scenario, StarForest, classify_graph_scenario


def _exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def _as_fraction_array(values) -> np.ndarray:
    out = np.empty(np.shape(values), dtype=object)
    flat = out.reshape(-1)
    for i, v in enumerate(np.asarray(values, dtype=object).reshape(-1)):
        flat[i] = v if isinstance(v, Fraction) else Fraction(v)
    return out


@dataclass(frozen=True)
class ClassicalModel:
    """Hidden-variable model: one distribution per source, one kernel per measurement.

    source_dists[e] is a probability vector over the hidden set of source e
    (same order as scenario.sources). kernels[v] has shape
    (k_{e1}, ..., k_{em}, d_v) where e1 < ... < em are the sources adjacent
    to measurement v in declaration order; each row over the last axis is a
    conditional distribution. The kernel's index set enforces locality.
    """

    scenario: Scenario
    source_dists: tuple[np.ndarray, ...]
    kernels: tuple[np.ndarray, ...]

    def __post_init__(self):
        s = self.scenario
        dists = tuple(np.asarray(d) for d in self.source_dists)
        kernels = tuple(np.asarray(k) for k in self.kernels)
        if len(dists) != len(s.sources) or len(kernels) != len(s.measurements):
            raise ScenarioMismatch("model arrays do not match the scenario's sources/measurements")
        cards = tuple(len(d) for d in dists)
        for v, kernel in enumerate(kernels):
            expected = tuple(cards[e] for e in s.sources_of_measurement[v]) + (s.outcome_counts[v],)
            if kernel.shape != expected:
                raise ScenarioMismatch(
                    f"kernel for {s.measurement_names[v]!r} has shape {kernel.shape}, "
                    f"expected {expected}")
        exact = all(_exact(a) for a in dists + kernels)
        if not exact and any(_exact(a) for a in dists + kernels):
            raise ScenarioMismatch("mixing exact and float arrays in one model")
        for d in dists:
            _check_normalized(d, exact, "source distribution")
        for kernel in kernels:
            _check_normalized(kernel, exact, "kernel row", axis=-1)
        for a in dists + kernels:
            a.flags.writeable = False
        object.__setattr__(self, "source_dists", dists)
        object.__setattr__(self, "kernels", kernels)

    @property
    def is_exact(self) -> bool:
        return _exact(self.source_dists[0]) if self.source_dists else False

    @property
    def hidden_cards(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.source_dists)

    def to_float(self) -> "ClassicalModel":
        if not self.is_exact:
            return self
        return ClassicalModel(
            self.scenario,
            tuple(d.astype(float) for d in self.source_dists),
            tuple(k.astype(float) for k in self.kernels),
        )

    def to_exact(self, max_denominator: int | None = None) -> "ClassicalModel":
        """Exact view; float entries must already be rational (dyadic) or a
        max_denominator must be given for snapping."""
        if self.is_exact:
            return self

        def conv(arr):
            out = _as_fraction_array(arr)
            if max_denominator is not None:
                flat = out.reshape(-1)
                for i, v in enumerate(flat):
                    flat[i] = v.limit_denominator(max_denominator)
            return out

        return ClassicalModel(
            self.scenario,
            tuple(conv(d) for d in self.source_dists),
            tuple(conv(k) for k in self.kernels),
        )


def _check_normalized(arr, exact, what, axis=None):
    sums = arr.sum() if axis is None else arr.sum(axis=axis)
    if exact:
        bad = (sums != 1) if axis is None else bool((sums != Fraction(1)).any())
        if bad:
            raise InvalidDistribution(f"{what} does not sum to 1 exactly")
        if any(p < 0 for p in arr.flat):
            raise InvalidDistribution(f"{what} has a negative entry")
    else:
        if np.abs(np.asarray(sums, dtype=float) - 1.0).max() > 1e-9:
            raise InvalidDistribution(f"{what} does not sum to 1 within 1e-9")
        if np.asarray(arr, dtype=float).min() < -1e-12:
            raise InvalidDistribution(f"{what} has a negative entry")


# ---------------------------------------------------------------------------
# evaluation

def evaluate_classical(m: ClassicalModel) -> JointDistribution:
    """Joint outcome distribution of the model, summed over all hidden values.

    Float models contract with einsum; exact models accumulate fractions by
    explicit enumeration of the hidden combinations. The result always
    satisfies the scenario's factorization constraints.
    """
    s = m.scenario
    if m.is_exact:
        table = _evaluate_exact(m)
        return JointDistribution(s.measurement_names, s.outcome_counts, table)
    subscripts, operands = _einsum_plan(m)
    table = np.einsum(subscripts, *operands, optimize=True)
    return JointDistribution(s.measurement_names, s.outcome_counts, table)


def _einsum_plan(m, skip=None):
    """Build the tensor-contraction spec; skip omits one operand (for gradients)."""
    s = m.scenario
    letters = iter(ascii_letters)
    src_letter = [next(letters) for _ in s.sources]
    out_letter = [next(letters) for _ in s.measurements]
    subs, ops = [], []
    for e, w in enumerate(m.source_dists):
        if skip == ("source", e):
            continue
        subs.append(src_letter[e])
        ops.append(w)
    for v, kernel in enumerate(m.kernels):
        if skip == ("kernel", v):
            continue
        subs.append("".join(src_letter[e] for e in s.sources_of_measurement[v]) + out_letter[v])
        ops.append(kernel)
    out = "".join(out_letter)
    if skip is not None:
        kind, i = skip
        skipped_sub = (src_letter[i] if kind == "source" else
                       "".join(src_letter[e] for e in s.sources_of_measurement[i]) + out_letter[i])
        return ",".join(subs) + "," + out + "->" + skipped_sub, ops
    return ",".join(subs) + "->" + out, ops


def _evaluate_exact(m: ClassicalModel) -> np.ndarray:
    s = m.scenario
    table = np.empty(s.outcome_counts, dtype=object)
    table[...] = Fraction(0)
    for combo in itertools.product(*(range(k) for k in m.hidden_cards)):
        weight = Fraction(1)
        for e, lam in enumerate(combo):
            weight *= m.source_dists[e][lam]
        if weight == 0:
            continue
        block = weight
        for v in range(len(s.measurements)):
            row = m.kernels[v][tuple(combo[e] for e in s.sources_of_measurement[v])]
            block = np.multiply.outer(block, row)
        table += block
    return table


# ---------------------------------------------------------------------------
# determinization

def determinize(m: ClassicalModel) -> ClassicalModel:
    """Equivalent model whose kernels are all 0/1.

    For each measurement with internal randomness, the least common multiple
    L of its kernel denominators is bundled into the first adjacent source:
    the hidden set becomes pairs (old value, r) with r uniform over L values,
    and the outcome is read off by locating r/L in the cumulative kernel row.
    The joint law is preserved exactly; requires exact (fraction) model data.
    """
    if not m.is_exact:
        raise IrrationalKernel("determinize needs exact rational kernels; "
                               "use to_exact() on rational float data first")
    s = m.scenario
    dists = [d.copy() for d in m.source_dists]
    kernels = [k.copy() for k in m.kernels]

    for v in range(len(s.measurements)):
        kernel = kernels[v]
        if all(p in (Fraction(0), Fraction(1)) for p in kernel.flat):
            continue
        denominators = [p.denominator for p in kernel.flat]
        lcd = 1
        for q in denominators:
            lcd = lcd * q // math.gcd(lcd, q)
        carrier = s.sources_of_measurement[v][0]
        old_card = len(dists[carrier])

        # expanded source: pairs (lambda, r), lambda-major, r uniform
        new_dist = np.empty(old_card * lcd, dtype=object)
        for lam in range(old_card):
            for r in range(lcd):
                new_dist[lam * lcd + r] = dists[carrier][lam] / lcd
        dists[carrier] = new_dist

        # rewrite every kernel touching the carrier source
        for u in range(len(s.measurements)):
            adj = s.sources_of_measurement[u]
            if carrier not in adj:
                continue
            pos = adj.index(carrier)
            old = kernels[u]
            new_shape = tuple(
                old.shape[i] * lcd if i == pos else old.shape[i]
                for i in range(len(old.shape)))
            new = np.empty(new_shape, dtype=object)
            d_u = s.outcome_counts[u]
            for idx in itertools.product(*(range(n) for n in new_shape[:-1])):
                old_idx = tuple(x // lcd if i == pos else x for i, x in enumerate(idx))
                r = idx[pos] % lcd
                if u == v:
                    row = old[old_idx]
                    cumulative = Fraction(0)
                    outcome = d_u - 1
                    for o in range(d_u):
                        cumulative += row[o]
                        if Fraction(r, lcd) < cumulative:
                            outcome = o
                            break
                    new[idx] = np.array(
                        [Fraction(1) if o == outcome else Fraction(0) for o in range(d_u)],
                        dtype=object)
                else:
                    new[idx] = old[old_idx]
            kernels[u] = new
    return ClassicalModel(s, tuple(dists), tuple(kernels))


# ---------------------------------------------------------------------------
# interpolation

def interpolate(m0: ClassicalModel, m1: ClassicalModel, t) -> ClassicalModel:
    """Convex deformation between two models on the same scenario.

    Hidden sets become pairs carrying both models' values with the product
    distribution; each kernel blends the two responses with weight t. The
    evaluated family is a path of classical correlations with the original
    joint laws at t=0 and t=1.
    """
    if m0.scenario != m1.scenario:
        raise ScenarioMismatch("interpolation needs a common scenario")
    s = m0.scenario
    exact = m0.is_exact and m1.is_exact and isinstance(t, Fraction)
    if not exact:
        m0, m1 = m0.to_float(), m1.to_float()
        t = float(t)
    if not 0 <= t <= 1:
        raise ValueError(f"interpolation parameter {t} outside [0, 1]")

    dists = []
    for d0, d1 in zip(m0.source_dists, m1.source_dists):
        dists.append(np.multiply.outer(d0, d1).reshape(-1))

    kernels = []
    one = Fraction(1) if exact else 1.0
    for v in range(len(s.measurements)):
        k0, k1 = m0.kernels[v], m1.kernels[v]
        adj = s.sources_of_measurement[v]
        shape0 = []
        shape1 = []
        merged = []
        for i, e in enumerate(adj):
            a0, a1 = k0.shape[i], k1.shape[i]
            shape0 += [a0, 1]
            shape1 += [1, a1]
            merged.append(a0 * a1)
        d_v = s.outcome_counts[v]
        blended = (one - t) * k0.reshape(shape0 + [d_v]) + t * k1.reshape(shape1 + [d_v])
        expanded_shape = []
        for i, e in enumerate(adj):
            expanded_shape += [k0.shape[i], k1.shape[i]]
        blended = np.broadcast_to(blended, expanded_shape + [d_v])
        kernels.append(np.ascontiguousarray(blended).reshape(merged + [d_v]))
    return ClassicalModel(s, tuple(dists), tuple(kernels))


# ---------------------------------------------------------------------------
# star scenarios

def star_model_construct(s: Scenario, p: JointDistribution) -> ClassicalModel:
    """Explicit model reproducing any correlation on a star-forest scenario.

    Every leaf's source simply carries the leaf's outcome, and each center
    responds with its conditional distribution given the leaves. Components
    are filled independently (a correlation factorizes across components).
    """
    verdict = classify_graph_scenario(s)
    if not isinstance(verdict, StarForest):
        raise NotStarForest(f"scenario contains an obstruction: {verdict}")
    report = is_correlation(s, p)
    if not report.is_correlation:
        raise NotACorrelation(f"distribution violates {len(report.violations)} factorization(s)")

    exact = p.is_exact
    names = s.measurement_names
    dists: list[np.ndarray | None] = [None] * len(s.sources)
    kernels: list[np.ndarray | None] = [None] * len(s.measurements)

    def one():
        return Fraction(1) if exact else 1.0

    for center, leaves in verdict.components:
        ci = s.measurement_index[center]
        d_center = s.outcome_counts[ci]
        adj = s.sources_of_measurement[ci]
        # which adjacent source connects which leaf (None for unary sources)
        edge_leaf: list[int | None] = []
        for e in adj:
            members = [w for w in s.source_members[e] if w != ci]
            edge_leaf.append(members[0] if members else None)

        if not leaves:
            # isolated vertex: its first (unary) source carries the marginal
            marg = p.marginalize([center]).table
            dists[adj[0]] = marg.copy()
            for extra in adj[1:]:
                dists[extra] = _point_dist(1, exact)
            shape = (len(marg),) + (1,) * (len(adj) - 1)
            kernel = np.zeros(shape + (d_center,), dtype=object if exact else float)
            for val in range(len(marg)):
                kernel[(val,) + (0,) * (len(adj) - 1) + (val,)] = one()
            kernels[ci] = kernel
            continue

        for leaf in leaves:
            li = s.measurement_index[leaf]
            leaf_adj = s.sources_of_measurement[li]
            d_leaf = s.outcome_counts[li]
            marg = p.marginalize([leaf]).table
            axes = []
            for e in leaf_adj:
                if ci in s.source_members[e]:
                    dists[e] = marg.copy()
                    axes.append(d_leaf)  # the carrier axis
                else:
                    dists[e] = _point_dist(1, exact)  # stray unary source
                    axes.append(1)
            kernel = np.zeros(tuple(axes) + (d_leaf,), dtype=object if exact else float)
            carrier_pos = axes.index(d_leaf)
            for val in range(d_leaf):
                idx = tuple(val if i == carrier_pos else 0 for i in range(len(axes)))
                kernel[idx + (val,)] = one()
            kernels[li] = kernel

        # center kernel: the conditional of the center given all leaves
        joint = p.marginalize([center] + list(leaves))
        axes = [1 if li is None else s.outcome_counts[li] for li in edge_leaf]
        for e, li in zip(adj, edge_leaf):
            if li is None:
                dists[e] = _point_dist(1, exact)
        kernel = np.zeros(tuple(axes) + (d_center,), dtype=object if exact else float)
        for leaf_vals in itertools.product(*(range(c) for c in axes)):
            assignment = {names[li]: val for li, val in zip(edge_leaf, leaf_vals)
                          if li is not None}
            weight = joint.marginalize(list(assignment)).table[
                tuple(assignment[n] for n in joint.names if n in assignment)]
            if (weight == 0) if exact else (float(weight) <= p.eps):
                row = ([Fraction(1, d_center)] * d_center if exact
                       else np.full(d_center, 1.0 / d_center))
                kernel[leaf_vals] = row
            else:
                kernel[leaf_vals] = joint.condition(assignment).table
        kernels[ci] = kernel

    return ClassicalModel(s, tuple(dists), tuple(kernels))


def _point_dist(card, exact):
    d = np.zeros(card, dtype=object if exact else float)
    d[0] = Fraction(1) if exact else 1.0
    if exact:
        for i in range(1, card):
            d[i] = Fraction(0)
    return d


# ---------------------------------------------------------------------------
# possibilistic (support) realizability

@dataclass(frozen=True)
class SupportPattern:
    """The set of outcome tuples occurring with positive probability."""

    names: tuple[str, ...]
    cards: tuple[int, ...]
    tuples: frozenset[tuple[int, ...]]

    def __post_init__(self):
        if not self.tuples:
            raise InvalidDistribution("empty support pattern")
        for t in self.tuples:
            if len(t) != len(self.cards) or any(not 0 <= x < c for x, c in zip(t, self.cards)):
                raise InvalidDistribution(f"support tuple {t} outside cardinalities {self.cards}")

    @classmethod
    def of(cls, p: JointDistribution, tol: float | None = None) -> "SupportPattern":
        return cls(p.names, p.cards, frozenset(p.support(tol)))


@dataclass(frozen=True)
class Realizable:
    model: ClassicalModel


@dataclass(frozen=True)
class NotRealizableUpTo:
    k: int
    complete: bool  # True when k covered |support|, making the verdict unconditional


@dataclass(frozen=True)
class Inconclusive:
    reason: str
    nodes: int = 0


def support_realizable(s: Scenario, sp: SupportPattern, k: int,
                       node_budget: int = 2_000_000, _clamp: bool = True):
    """Decide whether deterministic responses over independent hidden sets of
    size <= k can make the joint outcome image exactly equal the support.

    With k >= |support| the answer is unconditional: any realization can be
    pruned to one hidden value per support tuple (project onto the combos
    chosen to produce each tuple; recombinations stay inside the image), so
    hidden values beyond |support| never help. In that regime the search
    fixes the diagonal normalization where tuple i is produced by the combo
    assigning value i to every source. Returns Realizable with a witness
    model (uniform sources, 0/1 kernels), NotRealizableUpTo(k), or
    Inconclusive when the node budget runs out.
    """
    if k < 1:
        raise ValueError(f"hidden cardinality bound must be >= 1, got {k}")
    expected = {name: d for name, d in s.measurements}
    if expected != {n: c for n, c in zip(sp.names, sp.cards)}:
        raise VariableMismatch("support pattern does not match the scenario's measurements")
    supp = sorted(sp.tuples)
    m = len(supp)
    k_eff = min(k, m) if _clamp else k
    search = _SupportSearch(s, supp, k_eff, node_budget)
    try:
        model = search.run()
    except ResourceLimit as limit:
        return Inconclusive(str(limit), nodes=limit.nodes)
    if model is None:
        return NotRealizableUpTo(k, complete=k_eff >= m)
    return Realizable(model)


class _SupportSearch:
    """Backtracking over deterministic response tables with forward checking.

    Cell = one entry of one measurement's response table. Every full hidden
    combination is a constraint: its outcome tuple must lie in the support.
    Coverage is enforced by explicitly assigning, for each support tuple, a
    hidden combination that produces it (the diagonal when k >= |support|,
    otherwise searched with per-source value-introduction symmetry breaking).
    """

    def __init__(self, s: Scenario, supp, k: int, node_budget: int):
        self.s = s
        self.supp = supp
        self.k = k
        self.node_budget = node_budget
        self.nodes = 0
        n_meas = len(s.measurements)
        self.n_meas = n_meas
        self.adj = s.sources_of_measurement
        self.cards = s.outcome_counts

        # value masks: per measurement and outcome, a bitmask of support tuples
        self.masks = [[0] * self.cards[v] for v in range(n_meas)]
        for bit, t in enumerate(supp):
            for v in range(n_meas):
                self.masks[v][t[v]] |= 1 << bit
        self.full_mask = (1 << len(supp)) - 1

        # cell layout: per measurement a stride vector over its adjacent sources
        self.cell_base = []
        self.cell_strides = []
        total = 0
        for v in range(n_meas):
            deg = len(self.adj[v])
            strides = [k ** (deg - 1 - i) for i in range(deg)]
            self.cell_base.append(total)
            self.cell_strides.append(strides)
            total += k ** deg
        self.assign = [-1] * total

        # enumerate hidden combos and index cells -> combos
        self.n_sources = len(s.sources)
        self.combos: list[tuple[int, ...]] = []      # cell ids per measurement
        self.combo_mask: list[int] = []
        self.cell_combos: list[list[int]] = [[] for _ in range(total)]
        for combo in itertools.product(range(k), repeat=self.n_sources):
            cells = tuple(self._cell_id(v, combo) for v in range(n_meas))
            ci = len(self.combos)
            self.combos.append(cells)
            self.combo_mask.append(self.full_mask)
            for cell in cells:
                self.cell_combos[cell].append(ci)
        self.combo_unassigned = [self.n_meas] * len(self.combos)
        self.cell_owner = [0] * total  # measurement of each cell
        for v in range(n_meas):
            deg = len(self.adj[v])
            for off in range(k ** deg):
                self.cell_owner[self.cell_base[v] + off] = v

    def _cell_id(self, v, combo):
        off = 0
        for stride, e in zip(self.cell_strides[v], self.adj[v]):
            off += stride * combo[e]
        return self.cell_base[v] + off

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise ResourceLimit(f"support search exceeded {self.node_budget} nodes",
                                nodes=self.nodes)

    # -- assignment with trail-based undo ------------------------------------

    def _set(self, cell, value, trail):
        """Assign a cell; returns False on contradiction. Propagates units."""
        queue = [(cell, value)]
        while queue:
            cell, value = queue.pop()
            current = self.assign[cell]
            if current == value:
                continue
            if current != -1:
                return False
            self._tick()
            self.assign[cell] = value
            trail.append(cell)
            v = self.cell_owner[cell]
            mask = self.masks[v][value]
            for ci in self.cell_combos[cell]:
                new_mask = self.combo_mask[ci] & mask
                if new_mask != self.combo_mask[ci]:
                    trail.append((ci, self.combo_mask[ci]))
                    self.combo_mask[ci] = new_mask
                self.combo_unassigned[ci] -= 1
                trail.append((ci, "count"))
                if new_mask == 0:
                    return False
            # unit propagation over affected combos
            for ci in self.cell_combos[cell]:
                forced = self._forced_values(ci)
                if forced is None:
                    return False
                queue.extend(forced)
        return True

    def _forced_values(self, ci):
        """Cells of combo ci whose value is pinned by the remaining candidates."""
        if self.combo_unassigned[ci] == 0:
            return []
        forced = []
        mask = self.combo_mask[ci]
        for cell in self.combos[ci]:
            if self.assign[cell] != -1:
                continue
            v = self.cell_owner[cell]
            allowed = [o for o in range(self.cards[v]) if mask & self.masks[v][o]]
            if not allowed:
                return None
            if len(allowed) == 1:
                forced.append((cell, allowed[0]))
        return forced

    def _undo(self, trail, mark):
        while len(trail) > mark:
            item = trail.pop()
            if isinstance(item, int):
                self.assign[item] = -1
            elif item[1] == "count":
                self.combo_unassigned[item[0]] += 1
            else:
                self.combo_mask[item[0]] = item[1]

    # -- search phases ---------------------------------------------------------

    def run(self):
        trail: list = []
        if self.k >= len(self.supp):
            for i, t in enumerate(self.supp):
                combo = (i,) * self.n_sources
                for v in range(self.n_meas):
                    if not self._set(self._cell_id(v, combo), t[v], trail):
                        return None
            if self._complete(trail):
                return self._witness()
            return None
        return self._cover(0, [0] * self.n_sources, trail)

    def _cover(self, i, used, trail):
        """Choose a producing combo for support tuple i (symmetry-broken)."""
        if i == len(self.supp):
            if self._complete(trail):
                return self._witness()
            return None
        t = self.supp[i]
        choices_per_source = [range(min(used[e] + 1, self.k)) for e in range(self.n_sources)]
        for combo in itertools.product(*choices_per_source):
            self._tick()
            mark = len(trail)
            saved_used = used[:]
            for e in range(self.n_sources):
                if combo[e] == used[e]:
                    used[e] += 1
            ok = True
            for v in range(self.n_meas):
                if not self._set(self._cell_id(v, combo), t[v], trail):
                    ok = False
                    break
            if ok:
                result = self._cover(i + 1, used, trail)
                if result is not None:
                    return result
            self._undo(trail, mark)
            used[:] = saved_used
        return None

    def _complete(self, trail):
        """Fill the remaining cells so every hidden combo stays inside the support."""
        self._tick()
        best = None
        for ci, count in enumerate(self.combo_unassigned):
            if count == 0:
                continue
            candidates = bin(self.combo_mask[ci]).count("1")
            if best is None or candidates < best[0]:
                best = (candidates, ci)
        if best is None:
            return True
        _, ci = best
        cell = next(c for c in self.combos[ci] if self.assign[c] == -1)
        v = self.cell_owner[cell]
        mask = self.combo_mask[ci]
        for value in range(self.cards[v]):
            if not mask & self.masks[v][value]:
                continue
            mark = len(trail)
            if self._set(cell, value, trail) and self._complete(trail):
                return True
            self._undo(trail, mark)
        return False

    def _witness(self) -> ClassicalModel:
        s = self.s
        dists = tuple(np.full(self.k, Fraction(1, self.k), dtype=object)
                      for _ in range(self.n_sources))
        kernels = []
        for v in range(self.n_meas):
            deg = len(self.adj[v])
            shape = (self.k,) * deg + (self.cards[v],)
            kernel = np.empty(shape, dtype=object)
            kernel[...] = Fraction(0)
            for off in range(self.k ** deg):
                value = self.assign[self.cell_base[v] + off]
                assert value != -1
                idx = []
                rem = off
                for stride in self.cell_strides[v]:
                    idx.append(rem // stride)
                    rem %= stride
                kernel[tuple(idx) + (value,)] = Fraction(1)
            kernels.append(kernel)
        model = ClassicalModel(s, dists, tuple(kernels))
        # paranoia: the witness's support must equal the requested pattern
        got = frozenset(evaluate_classical(model).support())
        assert got == frozenset(self.supp), "witness support mismatch"
        return model


# ---------------------------------------------------------------------------
# heuristic probability fitting

@dataclass(frozen=True)
class FitResult:
    model: ClassicalModel | None
    residual: float

    @property
    def certified(self) -> bool:
        return self.model is not None


def fit_probabilities(s: Scenario, p: JointDistribution, k: int,
                      eps_fit: float = 1e-6, restarts: int = 40,
                      sweeps: int = 60, rng=None) -> FitResult:
    """Search for a classical model reproducing p by alternating least squares.

    The model distribution is linear in each source distribution and each
    kernel separately, so each block update is a least-squares fit over a
    (product of) probability simplices, solved by accelerated projected
    gradient. Only a success certifies anything: a returned model has been
    re-evaluated with a verified max-norm residual <= eps_fit. Failure to
    fit proves nothing (the objective is multilinear with local minima).
    """
    report = is_correlation(s, p)
    if not report.is_correlation:
        raise NotACorrelation("fit target must satisfy the scenario's factorizations")
    rng = np.random.default_rng(rng)
    target = p.to_float().table
    order = [p.index[n] for n in s.measurement_names]
    target = np.transpose(target, order)  # scenario measurement order

    best_model, best_residual = None, np.inf
    for _ in range(restarts):
        model = random_classical_model(s, k, rng=rng)
        dists = [d.copy() for d in model.source_dists]
        kernels = [kern.copy() for kern in model.kernels]
        residual = _alternating_ls(s, dists, kernels, target, sweeps, eps_fit)
        if residual < best_residual:
            best_model = ClassicalModel(s, tuple(dists), tuple(kernels))
            best_residual = residual
        if best_residual <= eps_fit * 0.25:
            break
    # re-evaluate the candidate before certifying
    final = float(np.abs(evaluate_classical(best_model).table - target).max())
    if final <= eps_fit:
        return FitResult(best_model, final)
    return FitResult(None, final)


def _alternating_ls(s, dists, kernels, target, sweeps, eps_fit):
    """Cycle exact block least-squares updates; mutates dists/kernels."""
    model_table = None
    blocks = ([("source", e) for e in range(len(dists))] +
              [("kernel", v) for v in range(len(kernels))])
    for _ in range(sweeps):
        for kind, i in blocks:
            coeff = _block_coefficient(s, dists, kernels, kind, i)
            n_out = target.size
            matrix = coeff.reshape(n_out, -1)
            if kind == "source":
                dists[i] = _simplex_ls(matrix, target.reshape(-1), dists[i],
                                       rows=None)
            else:
                d_v = kernels[i].shape[-1]
                flat = _simplex_ls(matrix, target.reshape(-1),
                                   kernels[i].reshape(-1), rows=d_v)
                kernels[i] = flat.reshape(kernels[i].shape)
        spec, ops = _einsum_plan_tuple(s, dists, kernels)
        model_table = np.einsum(spec, *ops, optimize=True)
        if np.abs(model_table - target).max() <= eps_fit * 0.25:
            break
    return float(np.abs(model_table - target).max())


def _einsum_plan_tuple(s, dists, kernels):
    stub = ClassicalModel.__new__(ClassicalModel)
    object.__setattr__(stub, "scenario", s)
    object.__setattr__(stub, "source_dists", tuple(dists))
    object.__setattr__(stub, "kernels", tuple(kernels))
    return _einsum_plan(stub)


def _block_coefficient(s, dists, kernels, kind, skip_index):
    """Tensor C with P(outcomes) = sum_cells C[outcomes, cells] * block[cells].

    The model table is linear in each block; for a kernel block the outcome
    axis of the block coincides with one output axis, which is expressed via
    an identity-matrix operand.
    """
    letters = iter(ascii_letters)
    src_letter = [next(letters) for _ in s.sources]
    out_letter = [next(letters) for _ in s.measurements]
    subs, ops = [], []
    for e, w in enumerate(dists):
        if (kind, skip_index) == ("source", e):
            continue
        subs.append(src_letter[e])
        ops.append(w)
    for v, kernel in enumerate(kernels):
        if (kind, skip_index) == ("kernel", v):
            continue
        subs.append("".join(src_letter[e] for e in s.sources_of_measurement[v]) + out_letter[v])
        ops.append(kernel)
    out = "".join(out_letter)
    if kind == "source":
        block_sub = src_letter[skip_index]
    else:
        fresh = next(letters)
        d_v = s.outcome_counts[skip_index]
        subs.append(out_letter[skip_index] + fresh)
        ops.append(np.eye(d_v))
        block_sub = "".join(
            src_letter[e] for e in s.sources_of_measurement[skip_index]) + fresh
    spec = ",".join(subs) + "->" + out + block_sub
    return np.einsum(spec, *ops, optimize=True)


def _simplex_ls(matrix, target, start, rows, iters=120):
    """min ||matrix @ x - target||^2 with x on a simplex (rows=None) or with
    each consecutive block of `rows` entries on a simplex (kernel rows).

    FISTA with the exact Lipschitz constant of the quadratic.
    """
    gram = matrix.T @ matrix
    lin = matrix.T @ target
    eig = np.linalg.eigvalsh(gram)[-1] if gram.shape[0] <= 64 else float(
        np.linalg.norm(gram, 2))
    lip = max(2.0 * eig, 1e-12)

    def project(z):
        if rows is None:
            return _project_simplex(z)
        return _project_simplex_rows(z.reshape(-1, rows)).reshape(-1)

    x = np.asarray(start, dtype=float).reshape(-1).copy()
    y = x.copy()
    t_acc = 1.0
    for _ in range(iters):
        grad = 2.0 * (gram @ y - lin)
        x_new = project(y - grad / lip)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        y = x_new + ((t_acc - 1.0) / t_new) * (x_new - x)
        if np.abs(x_new - x).max() < 1e-14:
            x = x_new
            break
        x, t_acc = x_new, t_new
    return x


def _project_simplex(vec):
    """Euclidean projection of a vector onto the probability simplex."""
    v = np.asarray(vec, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.clip(v - theta, 0.0, None)


def _project_simplex_rows(arr):
    flat = arr.reshape(-1, arr.shape[-1])
    out = np.vstack([_project_simplex(row) for row in flat])
    return out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# random model generation (used by demos and the test suites)

def random_classical_model(s: Scenario, k: int | Sequence[int], rng=None,
                           rational_denominator: int | None = None) -> ClassicalModel:
    """Random model with hidden cardinalities k (one int or one per source).

    With rational_denominator=q, all probabilities are fractions with
    denominator dividing q (suitable for exact arithmetic paths).
    """
    rng = np.random.default_rng(rng)
    cards = [k] * len(s.sources) if isinstance(k, int) else list(k)

    def rand_simplex(n):
        if rational_denominator is None:
            return rng.dirichlet([1.0] * n)
        cuts = rng.multinomial(rational_denominator, [1.0 / n] * n)
        return np.array([Fraction(int(c), rational_denominator) for c in cuts], dtype=object)

    dists = tuple(rand_simplex(cards[e]) for e in range(len(s.sources)))
    kernels = []
    for v in range(len(s.measurements)):
        shape = tuple(cards[e] for e in s.sources_of_measurement[v])
        d_v = s.outcome_counts[v]
        rows = [rand_simplex(d_v) for _ in range(int(np.prod(shape, dtype=int)))]
        kernel = np.stack(rows).reshape(shape + (d_v,))
        if rational_denominator is not None:
            kernel = kernel.astype(object)
        kernels.append(kernel)
    return ClassicalModel(s, dists, tuple(kernels))
