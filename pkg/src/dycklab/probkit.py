"""Exact finite distributions and the classical information-theory toolkit.

Entropies and mutual informations are in bits. ``KAPPA`` is the
average-encoding constant ln(2)/2, used verbatim next to bit-valued
informations.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

KAPPA = math.log(2) / 2

MASS_TOL = 1e-12


class DistributionError(ValueError):
    """Invalid distribution, mismatched sample spaces, or bad conditioning."""


@dataclass(frozen=True)
class Dist:
    """A probability distribution over a finite set of labelled outcomes."""

    outcomes: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.outcomes) != len(self.probs):
            raise DistributionError("outcomes and probs differ in length")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise DistributionError("duplicate outcome labels")
        if any(p < 0 for p in self.probs):
            raise DistributionError("negative probability")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > MASS_TOL:
            raise DistributionError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def from_mapping(cls, weights: Mapping[Hashable, float]) -> "Dist":
        items = list(weights.items())
        return cls(tuple(o for o, _ in items), tuple(float(p) for _, p in items))

    @classmethod
    def uniform(cls, outcomes: Iterable[Hashable]) -> "Dist":
        outcomes = tuple(outcomes)
        if not outcomes:
            raise DistributionError("uniform distribution over an empty set")
        return cls(outcomes, (1.0 / len(outcomes),) * len(outcomes))

    @classmethod
    def point(cls, outcome: Hashable) -> "Dist":
        return cls((outcome,), (1.0,))

    def as_dict(self) -> dict:
        return dict(zip(self.outcomes, self.probs))

    def prob(self, outcome: Hashable) -> float:
        try:
            return self.probs[self.outcomes.index(outcome)]
        except ValueError:
            return 0.0

    def support(self) -> tuple:
        return tuple(o for o, p in zip(self.outcomes, self.probs) if p > 0)

    def extend(self, outcomes: Iterable[Hashable]) -> "Dist":
        """Same distribution over a larger sample space (new outcomes get 0)."""
        weights = self.as_dict()
        for o in outcomes:
            weights.setdefault(o, 0.0)
        return Dist.from_mapping(weights)

    def to_json(self) -> str:
        return json.dumps(
            {"outcomes": [_jsonable(o) for o in self.outcomes],
             "probs": [repr(float(p)) for p in self.probs]}
        )

    @classmethod
    def from_json(cls, text: str) -> "Dist":
        doc = json.loads(text)
        outcomes = tuple(_hashable(o) for o in doc["outcomes"])
        return cls(outcomes, tuple(float(Fraction(p)) for p in doc["probs"]))


def _jsonable(o):
    if isinstance(o, tuple):
        return [_jsonable(v) for v in o]
    return o


def _hashable(o):
    if isinstance(o, list):
        return tuple(_hashable(v) for v in o)
    return o


def aligned(P: Dist, Q: Dist) -> tuple[np.ndarray, np.ndarray]:
    """Probability vectors of P and Q in a common outcome order."""
    if set(P.outcomes) != set(Q.outcomes):
        raise DistributionError("distributions live on different sample spaces")
    q = Q.as_dict()
    return np.asarray(P.probs, dtype=float), np.array([q[o] for o in P.outcomes], dtype=float)


def common_space(P: Dist, Q: Dist) -> tuple[Dist, Dist]:
    """Pad both distributions with zeros onto the union of their outcomes."""
    union = list(dict.fromkeys(P.outcomes + Q.outcomes))
    return P.extend(union), Q.extend(union)


def l1_distance(P: Dist, Q: Dist) -> float:
    p, q = aligned(P, Q)
    return float(np.abs(p - q).sum())


def hellinger(P: Dist, Q: Dist) -> float:
    p, q = aligned(P, Q)
    return _hellinger_vec(p, q)


def _hellinger_vec(p: np.ndarray, q: np.ndarray) -> float:
    # 1 - Bhattacharyya coefficient avoids cancellation issues of the squared sum
    bc = float(np.sqrt(p * q).sum())
    return math.sqrt(max(0.0, 1.0 - bc))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DistributionError(f"binary entropy needs p in [0, 1], got {p}")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def entropy(P: Dist | Sequence[float] | np.ndarray) -> float:
    probs = np.asarray(P.probs if isinstance(P, Dist) else P, dtype=float)
    probs = probs[probs > 0]
    return float(-(probs * np.log2(probs)).sum())


class Joint:
    """Joint distribution over a product of named factors.

    Stored sparsely as one integer code column per factor plus a
    probability column; ``labels[a][code]`` recovers the outcome label of
    factor ``a``. Zero-probability rows may be present.
    """

    def __init__(self, factors: Sequence[str], table: Mapping[tuple, float]):
        factors = tuple(factors)
        keys = list(table.keys())
        probs = np.fromiter((float(v) for v in table.values()), dtype=float, count=len(keys))
        cols, labels = [], []
        for a in range(len(factors)):
            index: dict = {}
            try:
                cols.append(np.fromiter((index.setdefault(k[a], len(index)) for k in keys),
                                        dtype=np.int64, count=len(keys)))
            except IndexError:
                raise DistributionError("outcome tuple with wrong arity") from None
            labels.append(tuple(index))
        if any(len(k) != len(factors) for k in keys):
            raise DistributionError("outcome tuple with wrong arity")
        self._init(factors, cols, labels, probs)
        self._dist = None

    def _init(self, factors, cols, labels, probs):
        self.factors = tuple(factors)
        if len(set(self.factors)) != len(self.factors):
            raise DistributionError("duplicate factor names")
        if (probs < 0).any():
            raise DistributionError("negative probability")
        total = math.fsum(probs)
        if abs(total - 1.0) > MASS_TOL:
            raise DistributionError(f"probabilities sum to {total!r}, not 1")
        self.cols = cols
        self.labels = labels
        self.probs = probs

    @classmethod
    def from_codes(cls, factors: Sequence[str], cols: Sequence[np.ndarray],
                   labels: Sequence[Sequence[Hashable]], probs: np.ndarray) -> "Joint":
        """Build directly from code columns; rows must be distinct outcomes."""
        obj = cls.__new__(cls)
        obj._init(factors, [np.asarray(c, dtype=np.int64) for c in cols],
                  [tuple(lab) for lab in labels], np.asarray(probs, dtype=float))
        obj._dist = None
        return obj

    @classmethod
    def from_array(cls, array: np.ndarray, factors: Sequence[str] | None = None) -> "Joint":
        """Joint over integer-labelled factors from a dense probability array."""
        array = np.asarray(array, dtype=float)
        factors = factors or [f"V{i}" for i in range(array.ndim)]
        grids = np.indices(array.shape).reshape(array.ndim, -1)
        labels = [tuple(range(s)) for s in array.shape]
        return cls.from_codes(factors, list(grids), labels, array.ravel())

    @property
    def dist(self) -> Dist:
        """The joint as a plain Dist over outcome tuples."""
        if self._dist is None:
            keys = self._keys(tuple(range(len(self.factors))))
            acc: dict = defaultdict(float)
            for k, p in zip(keys, self.probs.tolist()):
                acc[k] += p
            self._dist = Dist.from_mapping(acc)
        return self._dist

    def __repr__(self):
        return f"Joint(factors={self.factors}, rows={len(self.probs)})"

    def _keys(self, axes: tuple[int, ...]):
        columns = [[self.labels[a][c] for c in self.cols[a].tolist()] for a in axes]
        return list(zip(*columns)) if columns else [()] * len(self.probs)

    def items(self):
        return zip(self._keys(tuple(range(len(self.factors)))), self.probs.tolist())

    def _axes(self, names: Sequence[str] | str) -> tuple[int, ...]:
        if isinstance(names, str):
            names = (names,)
        try:
            return tuple(self.factors.index(n) for n in names)
        except ValueError as exc:
            raise DistributionError(f"unknown factor in {names!r}") from exc

    def _group(self, axes: tuple[int, ...], mask: np.ndarray | None = None):
        """Group rows by the combined code of ``axes``: (first row per group, masses)."""
        probs = self.probs if mask is None else np.where(mask, self.probs, 0.0)
        if not axes:
            return np.zeros(1, dtype=np.int64), np.array([probs.sum()])
        sizes = [len(self.labels[a]) for a in axes]
        if math.prod(sizes) < 2**62:
            key = np.zeros(len(probs), dtype=np.int64)
            for a, size in zip(axes, sizes):
                key = key * size + self.cols[a]
            _, first, inv = np.unique(key, return_index=True, return_inverse=True)
        else:
            _, first, inv = np.unique(np.stack([self.cols[a] for a in axes], axis=1), axis=0,
                                      return_index=True, return_inverse=True)
        return first, np.bincount(inv.ravel(), weights=probs, minlength=len(first))

    def _dist_from_groups(self, axes, first, mass) -> Dist:
        keys = [tuple(self.labels[a][self.cols[a][i]] for a in axes) for i in first.tolist()]
        return Dist(tuple(keys), tuple(mass.tolist()))

    def marginal(self, names: Sequence[str] | str) -> Dist:
        """Marginal over ``names``; outcomes are tuples in that order."""
        axes = self._axes(names)
        first, mass = self._group(axes)
        return self._dist_from_groups(axes, first, mass)

    def conditional(self, names: Sequence[str] | str, given: Mapping[str, Hashable]) -> Dist:
        axes = self._axes(names)
        mask = np.ones(len(self.probs), dtype=bool)
        for name, value in given.items():
            a = self._axes(name)[0]
            try:
                code = self.labels[a].index(value)
            except ValueError:
                raise DistributionError(f"{name}={value!r} never occurs") from None
            mask &= self.cols[a] == code
        total = float(self.probs[mask].sum())
        if total <= 0.0:
            raise DistributionError(f"conditioning on zero-probability event {dict(given)!r}")
        first, mass = self._group(axes, mask)
        keep = mass > 0
        return self._dist_from_groups(axes, first[keep], mass[keep] / total)

    def to_json(self) -> str:
        doc = json.loads(self.dist.to_json())
        doc["factors"] = list(self.factors)
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Joint":
        doc = json.loads(text)
        dist = Dist.from_json(json.dumps({"outcomes": doc["outcomes"], "probs": doc["probs"]}))
        return cls(doc["factors"], dict(zip(dist.outcomes, dist.probs)))

    def entropy(self, names: Sequence[str] | str) -> float:
        """Shannon entropy (bits) of the marginal over ``names``."""
        axes = self._axes(names)
        if not axes:
            return 0.0
        sizes = [len(self.labels[a]) for a in axes]
        size = math.prod(sizes)
        if size <= max(4 * len(self.probs), 1024):
            # compact key space: masses by direct bincount, no sort needed
            key = np.zeros(len(self.probs), dtype=np.int64)
            for a, s in zip(axes, sizes):
                key = key * s + self.cols[a]
            return entropy(np.bincount(key, weights=self.probs, minlength=size))
        return entropy(self._group(axes)[1])


def mutual_information(J: Joint, x: Sequence[str] | str | None = None,
                       y: Sequence[str] | str | None = None) -> float:
    """I(X:Y) in bits; defaults to the first two factors."""
    x = x if x is not None else J.factors[0]
    y = y if y is not None else J.factors[1]
    x, y = _names(x), _names(y)
    return max(0.0, J.entropy(x) + J.entropy(y) - J.entropy(x + y))


def conditional_mutual_information(J: Joint, x: Sequence[str] | str | None = None,
                                   y: Sequence[str] | str | None = None,
                                   z: Sequence[str] | str | None = None) -> float:
    """I(X:Y|Z) in bits; defaults to the first three factors."""
    x = _names(x if x is not None else J.factors[0])
    y = _names(y if y is not None else J.factors[1])
    z = _names(z if z is not None else J.factors[2])
    value = J.entropy(x + z) + J.entropy(y + z) - J.entropy(x + y + z) - J.entropy(z)
    return max(0.0, value)


def _names(v) -> tuple:
    return (v,) if isinstance(v, str) else tuple(v)


def avg_encoding_gap(J: Joint, a: str | None = None, b: str | None = None) -> tuple[float, float]:
    """Both sides of the average encoding inequality for factors A, B.

    Returns ``(E_b h(A|b, A)^2, KAPPA * I(A:B))``; the first never exceeds
    the second.
    """
    a = a or J.factors[0]
    b = b or J.factors[1]
    (ia,), (ib,) = J._axes(a), J._axes(b)
    na, nb = len(J.labels[ia]), len(J.labels[ib])
    if na * nb <= max(4 * len(J.probs), 1024):
        # dense table: sum_b p(b) h(A|b, A)^2 = 1 - sum_ab sqrt(p(a,b) p(a) p(b))
        table = np.zeros((na, nb))
        np.add.at(table, (J.cols[ia], J.cols[ib]), J.probs)
        pa, pb = table.sum(axis=1), table.sum(axis=0)
        lhs = max(0.0, 1.0 - float(np.sqrt(table * np.outer(pa, pb)).sum()))
        return lhs, KAPPA * mutual_information(J, a, b)
    marg_a = J.marginal(a)
    marg_b = J.marginal(b)
    lhs = 0.0
    for (bv,), pb in zip(marg_b.outcomes, marg_b.probs):
        if pb <= 0:
            continue
        cond = J.conditional(a, {b: bv}).extend(marg_a.outcomes)
        lhs += pb * hellinger(cond, marg_a) ** 2
    return lhs, KAPPA * mutual_information(J, a, b)


def mixture(weights: Sequence[float], dists: Sequence[Dist]) -> Dist:
    acc: dict = defaultdict(float)
    for w, d in zip(weights, dists):
        for o, p in zip(d.outcomes, d.probs):
            acc[o] += w * p
    return Dist.from_mapping(acc)


def random_dist(rng: np.random.Generator, size: int, sparsity: float = 0.0) -> Dist:
    """Random distribution on ``range(size)``; ``sparsity`` zeroes a fraction of cells."""
    w = rng.exponential(size=size)
    if sparsity > 0:
        w[rng.random(size) < sparsity] = 0.0
        if w.sum() == 0:
            w[rng.integers(size)] = 1.0
    w = w / w.sum()
    return Dist(tuple(range(size)), tuple(float(v) for v in w))
