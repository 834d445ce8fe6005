"""Factorization constraints a joint distribution must satisfy in a scenario.

A distribution p over the measurements of a scenario is a *correlation* when
for every pair of vertex sets U, W touched by no common source, the marginal
on U+W is the product of the marginals. Checking the maximal W for each U is
enough: marginals of a product stay products.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .dist import JointDistribution
from .errors import VariableMismatch
from .scenario import Scenario, gaifman_graph


@dataclass(frozen=True)
class CorrelationReport:
    """Outcome of a correlation check.

    violations holds (U, W, deviation) triples for every failed product test,
    deviation being the max-norm distance from the factorized marginal.
    """

    is_correlation: bool
    violations: tuple[tuple[tuple[str, ...], tuple[str, ...], float], ...]
    checks_performed: int


def unconnected_maximal_pairs(s: Scenario) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """All maximal pairs of vertex sets not connected by any source.

    For each nonempty U the partner is everything outside U and its Gaifman
    neighborhood. Unordered duplicates are removed, and pairs dominated by a
    larger pair (both sets contained in the larger ones) are dropped, since
    checking the dominating pair implies the dominated one.
    """
    g = gaifman_graph(s)
    names = s.measurement_names
    order = {n: i for i, n in enumerate(names)}

    seen: set[frozenset[frozenset[str]]] = set()
    pairs: list[tuple[frozenset[str], frozenset[str]]] = []
    for r in range(1, len(names)):
        for u_tuple in itertools.combinations(names, r):
            u = frozenset(u_tuple)
            closed = set(u)
            for v in u:
                closed |= g.neighbors(v)
            w = frozenset(names) - closed
            if not w:
                continue
            key = frozenset((u, w))
            if key in seen:
                continue
            seen.add(key)
            pairs.append((u, w))

    def dominated(p1, p2):
        (u1, w1), (u2, w2) = p1, p2
        return (u1 <= u2 and w1 <= w2) or (u1 <= w2 and w1 <= u2)

    maximal = [p for p in pairs
               if not any(q is not p and dominated(p, q) for q in pairs)]

    def sort_key(pair):
        u, w = pair
        return tuple(sorted(order[n] for n in u)), tuple(sorted(order[n] for n in w))

    result = []
    for u, w in maximal:
        u_t = tuple(sorted(u, key=order.__getitem__))
        w_t = tuple(sorted(w, key=order.__getitem__))
        if sort_key((w, u)) < sort_key((u, w)):
            u_t, w_t = w_t, u_t
        result.append((u_t, w_t))
    result.sort(key=lambda uw: (tuple(order[n] for n in uw[0]), tuple(order[n] for n in uw[1])))
    return result


def is_correlation(s: Scenario, p: JointDistribution) -> CorrelationReport:
    """Check every maximal unconnected pair for factorization.

    The distribution must carry exactly the scenario's measurements with the
    declared outcome counts (any variable order).
    """
    expected = {name: d for name, d in s.measurements}
    actual = {name: c for name, c in zip(p.names, p.cards)}
    if expected != actual:
        raise VariableMismatch(
            f"distribution variables {actual} do not match scenario measurements {expected}")

    violations = []
    pairs = unconnected_maximal_pairs(s)
    for u, w in pairs:
        deviation = p.product_deviation(u, w)
        if deviation > p.eps:
            violations.append((u, w, deviation))
    return CorrelationReport(not violations, tuple(violations), len(pairs))
