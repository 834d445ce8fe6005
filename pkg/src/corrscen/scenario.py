"""Correlation scenarios as hypergraphs of sources over fixed measurements.

A scenario is a hypergraph: vertices are measurements (each with a finite
outcome count), edges are independent sources, and an edge contains exactly
the measurements that receive a system from that source.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from .errors import InvalidArity, NotAGraphScenario, ScenarioValidationError, Violation

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class Scenario:
    """A validated correlation scenario.

    measurements: ordered (name, outcome count) pairs.
    sources: ordered (name, connected measurement names) pairs; the connect
    sets are stored sorted by measurement declaration order.

    Instances are immutable and safe to share between threads. Use
    validate_scenario() to construct one from untrusted data.
    """

    measurements: tuple[tuple[str, int], ...]
    sources: tuple[tuple[str, tuple[str, ...]], ...]

    @cached_property
    def measurement_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.measurements)

    @cached_property
    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.measurements)

    @cached_property
    def measurement_index(self) -> dict[str, int]:
        return {name: i for i, (name, _) in enumerate(self.measurements)}

    @cached_property
    def source_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.sources)

    @cached_property
    def source_members(self) -> tuple[tuple[int, ...], ...]:
        """Per source, the indices of connected measurements (ascending)."""
        idx = self.measurement_index
        return tuple(
            tuple(sorted(idx[m] for m in connects)) for _, connects in self.sources
        )

    @cached_property
    def sources_of_measurement(self) -> tuple[tuple[int, ...], ...]:
        """Per measurement, the indices of adjacent sources (declaration order)."""
        result = [[] for _ in self.measurements]
        for e, members in enumerate(self.source_members):
            for v in members:
                result[v].append(e)
        return tuple(tuple(r) for r in result)

    def outcomes(self, name: str) -> int:
        return self.measurements[self.measurement_index[name]][1]

    def __str__(self):
        srcs = ", ".join(f"{n}={{{','.join(c)}}}" for n, c in self.sources)
        return f"Scenario({len(self.measurements)} measurements; {srcs})"


@dataclass(frozen=True)
class GaifmanGraph:
    """Simple graph on measurements; u~w iff some source connects both."""

    vertices: tuple[str, ...]
    edges: frozenset[frozenset[str]]

    @cached_property
    def adjacency(self) -> dict[str, frozenset[str]]:
        adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        for e in self.edges:
            u, w = tuple(e)
            adj[u].add(w)
            adj[w].add(u)
        return {v: frozenset(ns) for v, ns in adj.items()}

    def neighbors(self, vertex: str) -> frozenset[str]:
        return self.adjacency[vertex]

    def components(self) -> list[tuple[str, ...]]:
        seen: set[str] = set()
        comps = []
        for v in self.vertices:
            if v in seen:
                continue
            stack, comp = [v], []
            seen.add(v)
            while stack:
                u = stack.pop()
                comp.append(u)
                for w in self.adjacency[u]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            comps.append(tuple(sorted(comp, key=self.vertices.index)))
        return comps


def scenario_violations(raw, strict: bool = False) -> list[Violation]:
    """Collect every violated invariant of a scenario description.

    raw is either a Scenario or a dict of the JSON form
    {"measurements": [{"name": ..., "outcomes": ...}, ...],
     "sources": [{"name": ..., "connects": [...]}, ...]}.

    With strict=True, unary sources are flagged as well; they are redundant
    for the factorization constraints but convenient in embeddings, so the
    default tolerates them.
    """
    measurements, sources = _raw_parts(raw)
    violations: list[Violation] = []

    seen_names: set[str] = set()
    for name, d in measurements:
        if not isinstance(name, str) or not _NAME_RE.match(name):
            violations.append(Violation("BadName", (str(name),), f"bad measurement name {name!r}"))
        if name in seen_names:
            violations.append(Violation("DuplicateName", (name,), f"duplicate name {name!r}"))
        seen_names.add(name)
        if not isinstance(d, int) or d < 1:
            violations.append(Violation("BadOutcomeCount", (name,),
                                        f"measurement {name!r} needs a positive outcome count, got {d!r}"))
    meas_names = [name for name, _ in measurements]
    meas_set = set(meas_names)

    connect_sets: list[tuple[str, frozenset[str]]] = []
    for name, connects in sources:
        if not isinstance(name, str) or not _NAME_RE.match(name):
            violations.append(Violation("BadName", (str(name),), f"bad source name {name!r}"))
        if name in seen_names:
            violations.append(Violation("DuplicateName", (name,), f"duplicate name {name!r}"))
        seen_names.add(name)
        cset = frozenset(connects)
        if not cset:
            violations.append(Violation("EmptySource", (name,), f"source {name!r} connects to nothing"))
            continue
        unknown = cset - meas_set
        if unknown:
            violations.append(Violation("UnknownMeasurement", (name,) + tuple(sorted(unknown)),
                                        f"source {name!r} names unknown measurements {sorted(unknown)}"))
            cset = cset & meas_set
        if strict and len(cset) == 1:
            violations.append(Violation("UnarySource", (name,),
                                        f"source {name!r} connects a single measurement"))
        connect_sets.append((name, cset))

    for (n1, c1), (n2, c2) in itertools.combinations(connect_sets, 2):
        if c1 <= c2 or c2 <= c1:
            violations.append(Violation("AntiChainViolation", (n1, n2),
                                        f"source {n1!r} is contained in source {n2!r} (or vice versa)"))

    profile: dict[frozenset[str], str] = {}
    for m in meas_names:
        edges = frozenset(n for n, c in connect_sets if m in c)
        if not edges:
            violations.append(Violation("IsolatedMeasurement", (m,),
                                        f"measurement {m!r} is connected to no source"))
            continue
        if edges in profile:
            violations.append(Violation("DuplicateVertexProfile", (profile[edges], m),
                                        f"measurements {profile[edges]!r} and {m!r} belong to exactly "
                                        f"the same sources"))
        else:
            profile[edges] = m
    return violations


def validate_scenario(raw, strict: bool = False) -> Scenario:
    """Validate a scenario description and return the immutable Scenario.

    Raises ScenarioValidationError carrying the full structured list of
    violations when any invariant fails:
      - every connected name must be a declared measurement;
      - no source's connect set may be contained in another's (anti-chain);
      - no two measurements may belong to exactly the same set of sources;
      - every measurement must be connected to at least one source.
    """
    violations = scenario_violations(raw, strict=strict)
    if violations:
        raise ScenarioValidationError(violations)
    measurements, sources = _raw_parts(raw)
    order = {name: i for i, (name, _) in enumerate(measurements)}
    normalized_sources = tuple(
        (name, tuple(sorted(connects, key=order.__getitem__))) for name, connects in sources
    )
    return Scenario(tuple(measurements), normalized_sources)


def _raw_parts(raw):
    if isinstance(raw, Scenario):
        return list(raw.measurements), [(n, list(c)) for n, c in raw.sources]
    if isinstance(raw, dict):
        measurements = [(m["name"], m["outcomes"]) for m in raw["measurements"]]
        sources = [(s["name"], list(s["connects"])) for s in raw["sources"]]
        return measurements, sources
    raise TypeError(f"cannot interpret {type(raw).__name__} as a scenario description")


def gaifman_graph(s: Scenario) -> GaifmanGraph:
    """The simple graph with an edge {u,w} iff some source connects u and w."""
    edges = set()
    for _, connects in s.sources:
        for u, w in itertools.combinations(connects, 2):
            edges.add(frozenset((u, w)))
    return GaifmanGraph(s.measurement_names, frozenset(edges))


# ---------------------------------------------------------------------------
# graph-scenario classification

@dataclass(frozen=True)
class StarForest:
    """Every connected component is a star; one (center, leaves) per component."""

    components: tuple[tuple[str, tuple[str, ...]], ...]


@dataclass(frozen=True)
class ContainsObstruction:
    """An induced subgraph witnessing that not all correlations are classical.

    kind is "C3", "C4" or "P4"; vertices are listed in cycle/path order.
    """

    kind: str
    vertices: tuple[str, ...]


def classify_graph_scenario(s: Scenario):
    """Classify a graph scenario as StarForest or ContainsObstruction.

    Requires every source to have arity <= 2 (arity-1 sources contribute no
    edges and are ignored; arity >= 3 raises NotAGraphScenario). A connected
    graph is a star iff it has no induced triangle, 4-cycle, or 4-path, so
    the returned obstruction certifies the verdict. The search is
    deterministic: triangles before 4-cycles before 4-paths, and within one
    kind the lexicographically smallest vertex set (declaration order).
    """
    for name, connects in s.sources:
        if len(connects) > 2:
            raise NotAGraphScenario(f"source {name!r} has arity {len(connects)}")

    g = gaifman_graph(s)
    names = s.measurement_names
    adj = {v: g.adjacency[v] for v in names}

    if all(_is_star(comp, adj) for comp in g.components()):
        comps = []
        for comp in g.components():
            center = max(comp, key=lambda v: (len(adj[v]), -names.index(v)))
            leaves = tuple(v for v in comp if v != center)
            comps.append((center, leaves))
        return StarForest(tuple(comps))

    for trio in itertools.combinations(names, 3):
        if _induced_kind(trio, adj) == "C3":
            return ContainsObstruction("C3", trio)
    quads = list(itertools.combinations(names, 4))
    for quad in quads:
        if _induced_kind(quad, adj) == "C4":
            return ContainsObstruction("C4", _cycle_order(quad, adj))
    for quad in quads:
        if _induced_kind(quad, adj) == "P4":
            return ContainsObstruction("P4", _path_order(quad, adj))
    raise AssertionError("non-star component without induced C3/C4/P4")  # pragma: no cover


def _is_star(comp, adj) -> bool:
    if len(comp) <= 2:
        return True
    degs = [len(adj[v] & set(comp)) for v in comp]
    edge_count = sum(degs) // 2
    return edge_count == len(comp) - 1 and max(degs) == len(comp) - 1


def _induced_kind(subset, adj):
    sub = set(subset)
    degs = {v: len(adj[v] & sub) for v in subset}
    edges = sum(degs.values()) // 2
    if len(subset) == 3:
        return "C3" if edges == 3 else None
    if edges == 4 and all(d == 2 for d in degs.values()):
        return "C4"
    if edges == 3 and sorted(degs.values()) == [1, 1, 2, 2] and _connected(subset, adj):
        return "P4"
    return None


def _connected(subset, adj):
    sub = set(subset)
    stack = [subset[0]]
    seen = {subset[0]}
    while stack:
        u = stack.pop()
        for w in adj[u] & sub:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == sub


def _cycle_order(quad, adj):
    start = quad[0]
    rest = [v for v in quad if v != start]
    nbrs = sorted((v for v in rest if v in adj[start]), key=quad.index)
    second = nbrs[0]
    third = next(v for v in rest if v not in adj[start])
    fourth = next(v for v in rest if v not in (second, third))
    return (start, second, third, fourth)


def _path_order(quad, adj):
    sub = set(quad)
    ends = sorted((v for v in quad if len(adj[v] & sub) == 1), key=quad.index)
    order = [ends[0]]
    while len(order) < 4:
        nxt = next(v for v in adj[order[-1]] & sub if v not in order)
        order.append(nxt)
    return tuple(order)


# ---------------------------------------------------------------------------
# scenario constructions

def build_ancestor_scenario(n: int, k: int, d: int | Iterable[int] = 2) -> Scenario:
    """Scenario for common-ancestor inference among n observed variables.

    One measurement per variable and one source per k-element subset of the
    variables: a joint distribution is classical here exactly when it can be
    produced without any latent node influencing more than k of the
    variables. d gives the outcome count (one integer for all, or one per
    variable).
    """
    if not (isinstance(n, int) and isinstance(k, int)) or n < 2 or k < 1 or k >= n:
        raise InvalidArity(f"need integers n >= 2 and 1 <= k < n, got n={n}, k={k}")
    cards = [d] * n if isinstance(d, int) else list(d)
    if len(cards) != n:
        raise InvalidArity(f"need {n} outcome counts, got {len(cards)}")
    names = [f"v{i + 1}" for i in range(n)]
    measurements = [{"name": names[i], "outcomes": cards[i]} for i in range(n)]
    sources = [
        {"name": "s_" + "_".join(names[i] for i in combo),
         "connects": [names[i] for i in combo]}
        for combo in itertools.combinations(range(n), k)
    ]
    return validate_scenario({"measurements": measurements, "sources": sources})


def _scenario(measurements, sources) -> Scenario:
    return validate_scenario({
        "measurements": [{"name": n, "outcomes": d} for n, d in measurements],
        "sources": [{"name": n, "connects": list(c)} for n, c in sources],
    })


def p4_scenario(d_out: int = 2, d_set: int = 2) -> Scenario:
    """Path scenario x - a - b - y (three pairwise sources along a path)."""
    return _scenario(
        [("x", d_set), ("a", d_out), ("b", d_out), ("y", d_set)],
        [("XA", ("x", "a")), ("AB", ("a", "b")), ("BY", ("b", "y"))],
    )


def p5_scenario(d: tuple[int, int, int, int, int] = (2, 2, 2, 2, 2)) -> Scenario:
    """Path scenario x - a - b - c - z (the unconditional bilocality scenario)."""
    names = ("x", "a", "b", "c", "z")
    return _scenario(
        list(zip(names, d)),
        [("XA", ("x", "a")), ("AB", ("a", "b")), ("BC", ("b", "c")), ("CZ", ("c", "z"))],
    )


def c3_scenario(d: int | tuple[int, int, int] = 2) -> Scenario:
    """Triangle scenario: three measurements, each pair sharing a source."""
    cards = (d, d, d) if isinstance(d, int) else d
    return _scenario(
        [("a", cards[0]), ("b", cards[1]), ("c", cards[2])],
        [("AB", ("a", "b")), ("BC", ("b", "c")), ("CA", ("c", "a"))],
    )


def c4_scenario(d: int | tuple[int, int, int, int] = 2) -> Scenario:
    """Square scenario on a, b, x, y with sources AB, BY, YX, XA."""
    cards = (d, d, d, d) if isinstance(d, int) else d
    return _scenario(
        [("a", cards[0]), ("b", cards[1]), ("x", cards[2]), ("y", cards[3])],
        [("AB", ("a", "b")), ("BY", ("b", "y")), ("YX", ("y", "x")), ("XA", ("x", "a"))],
    )


def star_scenario(k: int, d: int = 2) -> Scenario:
    """Star scenario: center a sharing one source with each leaf b1..bk."""
    measurements = [("a", d)] + [(f"b{i + 1}", d) for i in range(k)]
    sources = [(f"AB{i + 1}", ("a", f"b{i + 1}")) for i in range(k)]
    return _scenario(measurements, sources)


def multiarm_scenario(k: int, d_out: int = 2, d_set: int = 2) -> Scenario:
    """k two-party arms a_i - x_i plus one k-partite source over all a_i.

    The two-arm case is the path scenario x - a - b - y up to renaming.
    """
    if k < 2:
        raise InvalidArity(f"need k >= 2 arms, got {k}")
    measurements = [(f"a{i + 1}", d_out) for i in range(k)] + [(f"x{i + 1}", d_set) for i in range(k)]
    sources = [("CENTER", tuple(f"a{i + 1}" for i in range(k)))]
    sources += [(f"ARM{i + 1}", (f"a{i + 1}", f"x{i + 1}")) for i in range(k)]
    return _scenario(measurements, sources)
