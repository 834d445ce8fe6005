"""Dense joint probability distributions over named finite variables.

Tables are stored row-major with the last variable fastest. Entries may be
float64 or exact fractions (object dtype); all derived quantities fall back
to float where exactness is impossible (entropies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidDistribution, OverlappingSets, UnknownVariable, ZeroProbabilityCondition

#: tolerance for entropy comparisons; rounding is amplified by the logs,
#: so this is looser than the probability tolerance.
ENTROPY_EPS = 1e-7


def _is_exact(table: np.ndarray) -> bool:
    return table.dtype == object


@dataclass(frozen=True)
class JointDistribution:
    """An immutable dense joint distribution.

    names/cards give the ordered variables; table has shape == cards.
    eps is the tolerance used by every approximate predicate on this
    distribution (normalization, product tests, support membership).
    """

    names: tuple[str, ...]
    cards: tuple[int, ...]
    table: np.ndarray
    eps: float = 1e-9

    def __post_init__(self):
        names = tuple(self.names)
        cards = tuple(int(c) for c in self.cards)
        if len(set(names)) != len(names):
            raise InvalidDistribution(f"duplicate variable names in {names}")
        table = np.asarray(self.table)
        if table.shape != cards:
            table = table.reshape(cards)
        if _is_exact(table):
            total = table.sum()
            if any(p < 0 for p in table.flat):
                raise InvalidDistribution("negative probability in exact table")
            if total != 1:
                raise InvalidDistribution(f"exact table sums to {total}, not 1")
        else:
            table = np.array(table, dtype=float)
            if table.min(initial=0.0) < -self.eps:
                raise InvalidDistribution(f"probability {table.min()} below -eps")
            table = np.clip(table, 0.0, None)
            total = float(table.sum())
            if abs(total - 1.0) > self.eps:
                raise InvalidDistribution(f"table sums to {total}, not 1 within {self.eps}")
        table.flags.writeable = False
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "cards", cards)
        object.__setattr__(self, "table", table)

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_flat(cls, names: Sequence[str], cards: Sequence[int], flat, eps: float = 1e-9):
        """Build from a dense flat list, last variable fastest."""
        arr = np.asarray(flat, dtype=object if any(isinstance(p, Fraction) for p in flat) else float)
        return cls(tuple(names), tuple(int(c) for c in cards), arr.reshape(tuple(cards)), eps)

    @classmethod
    def from_support(cls, names, cards, support: Mapping[tuple, object] | Iterable, eps: float = 1e-9):
        """Build from sparse (outcome tuple -> probability) entries."""
        items = support.items() if isinstance(support, Mapping) else support
        items = list(items)
        exact = any(isinstance(p, Fraction) for _, p in items)
        table = np.zeros(tuple(cards), dtype=object if exact else float)
        if exact:
            table[...] = Fraction(0)
        for values, p in items:
            table[tuple(values)] += p
        return cls(tuple(names), tuple(int(c) for c in cards), table, eps)

    @property
    def is_exact(self) -> bool:
        return _is_exact(self.table)

    @cached_property
    def index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.names)}

    def flat(self) -> np.ndarray:
        return self.table.reshape(-1)

    def prob(self, assignment: Mapping[str, int]):
        """Probability of a full outcome assignment."""
        if set(assignment) != set(self.names):
            raise UnknownVariable(f"need exactly the variables {self.names}")
        return self.table[tuple(assignment[n] for n in self.names)]

    def support(self, tol: float | None = None) -> list[tuple[int, ...]]:
        """Outcome tuples with probability above tol (default eps)."""
        tol = self.eps if tol is None else tol
        if self.is_exact:
            return [tuple(ix) for ix in np.argwhere(self.table != Fraction(0))]
        return [tuple(int(i) for i in ix) for ix in np.argwhere(self.table > tol)]

    def to_float(self) -> "JointDistribution":
        if not self.is_exact:
            return self
        return JointDistribution(self.names, self.cards, self.table.astype(float), self.eps)

    # -- core operations -------------------------------------------------------

    def _axes_of(self, subset: Iterable[str]) -> list[int]:
        axes = []
        for name in subset:
            if name not in self.index:
                raise UnknownVariable(f"unknown variable {name!r}")
            axes.append(self.index[name])
        return axes

    def marginalize(self, keep: Iterable[str]) -> "JointDistribution":
        """Sum out everything except keep; keep retains the original order."""
        keep_set = set(keep)
        if not keep_set:
            raise UnknownVariable("cannot marginalize to an empty variable set")
        self._axes_of(keep_set)
        drop = tuple(i for i, n in enumerate(self.names) if n not in keep_set)
        table = self.table.sum(axis=drop) if drop else self.table
        names = tuple(n for n in self.names if n in keep_set)
        cards = tuple(c for n, c in zip(self.names, self.cards) if n in keep_set)
        return JointDistribution(names, cards, table, self.eps)

    def condition(self, given: Mapping[str, int]) -> "JointDistribution":
        """Distribution of the remaining variables given a partial assignment."""
        if not given:
            return self
        axes = self._axes_of(given)
        slicer = [slice(None)] * len(self.names)
        for name, value in given.items():
            slicer[self.index[name]] = value
        block = self.table[tuple(slicer)]
        total = block.sum()
        if (total == 0) if self.is_exact else (float(total) <= self.eps):
            raise ZeroProbabilityCondition(f"conditioning event {dict(given)} has probability {total}")
        names = tuple(n for n in self.names if n not in given)
        cards = tuple(c for n, c in zip(self.names, self.cards) if n not in given)
        if not names:
            raise ZeroProbabilityCondition("cannot condition on every variable")
        return JointDistribution(names, cards, block / total, self.eps)

    # -- entropic quantities ---------------------------------------------------

    def entropy(self, subset: Iterable[str] | None = None) -> float:
        """Shannon entropy of the marginal on subset, in bits."""
        subset = tuple(subset) if subset is not None else self.names
        if not subset:
            raise UnknownVariable("entropy of an empty variable set")
        marg = self.marginalize(subset).to_float().flat()
        nz = marg[marg > 0]
        return float(-(nz * np.log2(nz)).sum())

    def mutual_information(self, first: Iterable[str], second: Iterable[str]) -> float:
        """I(first : second) = H(first) + H(second) - H(first, second), in bits.

        Clamped to be nonnegative; tiny negative values are rounding noise.
        """
        first, second = tuple(first), tuple(second)
        if set(first) & set(second):
            raise OverlappingSets(f"{first} and {second} overlap")
        if not first or not second:
            raise OverlappingSets("mutual information needs two nonempty sets")
        value = self.entropy(first) + self.entropy(second) - self.entropy(first + second)
        return max(value, 0.0)

    def is_product(self, first: Iterable[str], second: Iterable[str]) -> bool:
        """Whether the marginal on first+second factorizes, within eps (max norm)."""
        return self.product_deviation(first, second) <= self.eps

    def product_deviation(self, first: Iterable[str], second: Iterable[str]) -> float:
        """Max-norm distance between the joint marginal and the product of marginals."""
        first, second = tuple(first), tuple(second)
        if set(first) & set(second):
            raise OverlappingSets(f"{first} and {second} overlap")
        if not first or not second:
            raise OverlappingSets("product test needs two nonempty sets")
        both = self.marginalize(first + second).to_float()
        m1 = both.marginalize(first).table
        m2 = both.marginalize(second).table
        axes1 = [both.index[n] for n in both.names if n in set(first)]
        axes2 = [both.index[n] for n in both.names if n in set(second)]
        shape1 = [both.cards[i] if i in axes1 else 1 for i in range(len(both.names))]
        shape2 = [both.cards[i] if i in axes2 else 1 for i in range(len(both.names))]
        product = m1.reshape(shape1) * m2.reshape(shape2)
        return float(np.abs(both.table - product).max())


def uniform(names: Sequence[str], cards: Sequence[int]) -> JointDistribution:
    size = int(np.prod(cards))
    return JointDistribution.from_flat(names, cards, np.full(size, 1.0 / size))


def point_mass(names: Sequence[str], cards: Sequence[int], values: Sequence[int]) -> JointDistribution:
    table = np.zeros(tuple(cards))
    table[tuple(values)] = 1.0
    return JointDistribution(tuple(names), tuple(cards), table)


def perfect_correlation() -> JointDistribution:
    """Three binary variables, all equal: 1/2 on (0,0,0) and 1/2 on (1,1,1)."""
    return JointDistribution.from_support(
        ("a", "b", "c"), (2, 2, 2), {(0, 0, 0): 0.5, (1, 1, 1): 0.5})


def pr_box_correlation() -> JointDistribution:
    """Uniformly-sampled Popescu-Rohrlich box as a joint distribution.

    Variables (a, b, x, y), all bits: probability 1/8 on each tuple with
    a XOR b == x AND y, zero elsewhere.
    """
    table = np.zeros((2, 2, 2, 2))
    for a, b, x, y in np.ndindex(2, 2, 2, 2):
        if a ^ b == x & y:
            table[a, b, x, y] = 0.125
    return JointDistribution(("a", "b", "x", "y"), (2, 2, 2, 2), table)


# functional aliases mirroring the operation names

def marginalize(p: JointDistribution, keep) -> JointDistribution:
    return p.marginalize(keep)


def condition(p: JointDistribution, given) -> JointDistribution:
    return p.condition(given)


def entropy(p: JointDistribution, subset=None) -> float:
    return p.entropy(subset)


def mutual_information(p: JointDistribution, first, second) -> float:
    return p.mutual_information(first, second)


def is_product(p: JointDistribution, first, second) -> bool:
    return p.is_product(first, second)
