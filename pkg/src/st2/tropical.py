"""Bounding matrices and their admissible-exponent cones.

A bounding matrix eps is a square nonnegative matrix indexed by a finite
operator family; the admissible cone is

    Omega(eps) = { t in (0, inf)^I : eps_ij * t_i < t_j for all i, j }.

Omega(eps) is nonempty exactly when every directed cycle of the positive
entries of eps has entry product < 1 (the decreasing cycle condition); all
routines here revolve around that equivalence. Rational inputs are handled
exactly (fractions.Fraction end to end); float inputs fall back to a
documented 1e-12 log-space tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import networkx as nx
import numpy as np

__all__ = [
    "UNBOUNDED",
    "BoundingMatrix",
    "ExponentVector",
    "CycleCheck",
    "check_decreasing_cycle",
    "cone_contains",
    "cone_sample",
    "prescribed_order_ray",
    "complex_bounding_matrix",
    "host_order_bound",
    "bounding_direct_sum",
]

# exact enumeration of simple cycles up to this size; log-space Bellman-Ford above
_ENUMERATION_CUTOFF = 12
_FLOAT_TOL = 1e-12


class _Unbounded:
    """Explicit marker for an infinite regularity component (never a float inf)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __reduce__(self):
        return (_Unbounded, ())


UNBOUNDED = _Unbounded()


def _coerce_entry(x):
    """int/Fraction/"p/q" become Fraction; floats stay floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    raise TypeError(f"unsupported entry type {type(x).__name__}")


@dataclass(frozen=True)
class ExponentVector:
    """A tuple of positive exponents; regularity vectors may carry UNBOUNDED."""

    values: tuple

    def __init__(self, values, allow_unbounded: bool = False):
        vals = []
        for v in values:
            if v is UNBOUNDED:
                if not allow_unbounded:
                    raise ValueError("UNBOUNDED component not allowed here")
                vals.append(UNBOUNDED)
                continue
            v = _coerce_entry(v)
            if v <= 0:
                raise ValueError(f"exponent components must be positive, got {v}")
            vals.append(v)
        object.__setattr__(self, "values", tuple(vals))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def as_floats(self) -> np.ndarray:
        """Float view; UNBOUNDED renders as math.inf (display/boundary use only)."""
        return np.array([math.inf if v is UNBOUNDED else float(v) for v in self.values])

    @classmethod
    def parse(cls, text: str, allow_unbounded: bool = False) -> "ExponentVector":
        """Parse "1,1/2,0.25,inf" style component lists."""
        vals = []
        for tok in text.split(","):
            tok = tok.strip()
            if tok.lower() in ("inf", "infinity", "unbounded"):
                vals.append(UNBOUNDED)
            elif "/" in tok:
                vals.append(Fraction(tok))
            elif "." in tok or "e" in tok.lower():
                vals.append(float(tok))
            else:
                vals.append(Fraction(int(tok)))
        return cls(vals, allow_unbounded=allow_unbounded)


def _as_vector(t, n: int, allow_unbounded: bool = False) -> ExponentVector:
    if not isinstance(t, ExponentVector):
        t = ExponentVector(t, allow_unbounded=allow_unbounded)
    if len(t) != n:
        raise ValueError(f"expected {n} components, got {len(t)}")
    return t


class BoundingMatrix:
    """Square nonnegative matrix with labeled indices and exact/float entries."""

    def __init__(self, rows, labels: Sequence[str] | None = None):
        entries = []
        for row in rows:
            entries.append(tuple(_coerce_entry(v) for v in row))
        n = len(entries)
        for row in entries:
            if len(row) != n:
                raise ValueError("bounding matrix must be square")
            for v in row:
                if v < 0:
                    raise ValueError(f"bounding matrix entries must be nonnegative, got {v}")
        if labels is None:
            labels = [f"v{i}" for i in range(n)]
        labels = tuple(str(l) for l in labels)
        if len(labels) != n:
            raise ValueError("label count must match matrix size")
        self.entries = tuple(entries)
        self.labels = labels
        self.n = n

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for row in self.entries for v in row)

    def float_view(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.entries])

    def positive_edges(self):
        for i in range(self.n):
            for j in range(self.n):
                if self.entries[i][j] > 0:
                    yield i, j, self.entries[i][j]

    def to_json(self) -> dict:
        ser = []
        for row in self.entries:
            ser.append([[v.numerator, v.denominator] if isinstance(v, Fraction) else float(v) for v in row])
        return {"labels": list(self.labels), "entries": ser}

    @classmethod
    def from_json(cls, obj: dict) -> "BoundingMatrix":
        rows = []
        for row in obj["entries"]:
            out = []
            for v in row:
                if isinstance(v, (list, tuple)):
                    out.append(Fraction(int(v[0]), int(v[1])))
                else:
                    out.append(float(v))
            rows.append(out)
        return cls(rows, labels=obj.get("labels"))

    def __repr__(self):
        return f"BoundingMatrix(n={self.n}, labels={list(self.labels)})"


class CycleCheck(NamedTuple):
    ok: bool
    cycle: list | None
    product: object


def check_decreasing_cycle(eps: BoundingMatrix) -> CycleCheck:
    """Decide the decreasing cycle condition; on failure return a witness.

    The witness is a vertex list [v0, ..., vk] describing the directed cycle
    v0 -> v1 -> ... -> vk -> v0 whose entry product is >= 1, together with
    that product (exact when the matrix is exact).
    """
    if eps.n <= _ENUMERATION_CUTOFF:
        return _check_by_enumeration(eps)
    return _check_by_bellman_ford(eps)


def _check_by_enumeration(eps: BoundingMatrix) -> CycleCheck:
    g = nx.DiGraph()
    g.add_nodes_from(range(eps.n))
    for i, j, _ in eps.positive_edges():
        g.add_edge(i, j)
    one = Fraction(1) if eps.is_exact else 1.0
    for cycle in nx.simple_cycles(g):
        p = one
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            p = p * eps.entries[a][b]
        if p >= 1:
            return CycleCheck(False, list(cycle), p)
    return CycleCheck(True, None, None)


def _check_by_bellman_ford(eps: BoundingMatrix) -> CycleCheck:
    """Detect a cycle with entry product >= 1 via shortest paths on -log weights.

    A product->sum transcription: a cycle has product >= 1 - O(1e-12) exactly
    when its -log weight sum is <= 0 up to the documented tolerance; a small
    per-edge shift makes those cycles strictly negative for Bellman-Ford.
    """
    n = eps.n
    edges = [(i, j, -math.log(float(v)) - _FLOAT_TOL) for i, j, v in eps.positive_edges()]
    dist = [0.0] * n
    pred: list[int | None] = [None] * n
    bad_edge = None
    for it in range(n + 1):
        changed = False
        for i, j, w in edges:
            if dist[i] + w < dist[j] - 1e-15:
                dist[j] = dist[i] + w
                pred[j] = i
                changed = True
                if it == n:
                    bad_edge = (i, j)
                    break
        if not changed:
            return CycleCheck(True, None, None)
        if bad_edge:
            break
    if bad_edge is None:
        return CycleCheck(True, None, None)
    # walk predecessors n steps to land inside the negative cycle, then peel it off
    v = bad_edge[0]
    for _ in range(n):
        v = pred[v]
    cycle_rev = [v]
    u = pred[v]
    while u != v:
        cycle_rev.append(u)
        u = pred[u]
    cycle = list(reversed(cycle_rev))
    p = 1.0
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        p *= float(eps.entries[a][b])
    return CycleCheck(False, cycle, p)


def cone_contains(eps: BoundingMatrix, t) -> bool:
    """Strict membership t in Omega(eps); exact when both sides are rational."""
    t = _as_vector(t, eps.n)
    vals = t.values
    for i, j, e in eps.positive_edges():
        if not e * vals[i] < vals[j]:
            return False
    return True


def cone_sample(eps: BoundingMatrix, margin=Fraction(1, 1000)) -> ExponentVector | None:
    """Produce a point of Omega(eps), or None when the cone is empty.

    Longest-path relaxation in max-times form: starting from all-ones, push
    t_j up to (1+margin) * eps_ij * t_i until stable. If the margin turns a
    legal (product < 1) cycle into a divergent one, the margin is halved and
    the relaxation retried; exact inputs always terminate because true cycle
    products are bounded away from 1 by an actual rational gap.
    """
    if not check_decreasing_cycle(eps).ok:
        return None
    exact = eps.is_exact
    edges = list(eps.positive_edges())
    margin = Fraction(margin) if exact else float(margin)
    for _ in range(60):
        mu = 1 + margin
        t = [Fraction(1) if exact else 1.0] * eps.n
        diverged = False
        for it in range(eps.n + 1):
            changed = False
            for i, j, e in edges:
                cand = mu * e * t[i]
                if cand > t[j]:
                    t[j] = cand
                    changed = True
            if not changed:
                break
            if it == eps.n:
                diverged = True
        if not diverged:
            m = max(t)
            t = [v / m for v in t]
            if cone_contains(eps, t):
                return ExponentVector(t)
        margin = margin / 2
    return None


def prescribed_order_ray(m, tau=1) -> ExponentVector:
    """The exponent ray t_j = tau / m_j attached to a vector of weights m."""
    tau = _coerce_entry(tau)
    if tau <= 0:
        raise ValueError("tau must be positive")
    out = []
    for mj in m:
        mj = _coerce_entry(mj)
        if mj < 1:
            raise ValueError("orders must be >= 1")
        out.append(tau / mj)
    return ExponentVector(out)


def complex_bounding_matrix(m, adjacency_band: int = 1) -> BoundingMatrix:
    """Banded bounding matrix (m_i - 1)/m_j on |i - j| <= adjacency_band.

    m lists the per-level orders of a weighted complex; levels of order 1
    contribute zero rows (their commutators need no tail correction).
    """
    orders = [_coerce_entry(v) for v in m]
    for v in orders:
        if v < 1:
            raise ValueError("orders must be >= 1")
    n = len(orders)
    rows = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if abs(i - j) <= adjacency_band:
                rows[i][j] = (orders[i] - 1) / orders[j]
    return BoundingMatrix(rows, labels=[f"d{i}" for i in range(n)])


def host_order_bound(eps: BoundingMatrix, t, rho=None):
    """Infimal order of a Hilbert-space embedding compatible with (eps, t, rho).

    Computes max_{i,j} max{1, t_i (rho_i - 1)/(rho_i - t_i)} / (1 - eps_ij t_i / t_j)
    with the conventions rho_i = UNBOUNDED -> factor max{1, t_i} and
    rho_i = t_i = 1 -> factor 1. Exact output for exact input.
    """
    t = _as_vector(t, eps.n)
    if rho is None:
        rho = [UNBOUNDED] * eps.n
    rho = _as_vector(rho, eps.n, allow_unbounded=True)
    if not cone_contains(eps, t):
        raise ValueError("t lies outside the admissible cone of eps")
    factors = []
    for ti, ri in zip(t.values, rho.values):
        if ri is UNBOUNDED:
            factors.append(max(1, ti))
            continue
        if ri < 1:
            raise ValueError("regularity components must be >= 1")
        if ti <= 1:
            # (rho-1)/(rho-t) <= 1 here (including the rho = t = 1 convention)
            factors.append(Fraction(1) if isinstance(ti, Fraction) else 1.0)
            continue
        if not ti < ri:
            raise ValueError(f"component t={ti} must lie below its regularity rho={ri}")
        factors.append(max(1, (ri - 1) / (ri - ti) * ti))
    bound = max(factors)
    vals = t.values
    for i, j, e in eps.positive_edges():
        gap = 1 - e * vals[i] / vals[j]
        cand = factors[i] / gap
        if cand > bound:
            bound = cand
    return bound


def bounding_direct_sum(a: BoundingMatrix, b: BoundingMatrix) -> BoundingMatrix:
    """Block-diagonal join; the admissible cone is the product of the two cones."""
    labels = list(a.labels) + list(b.labels)
    if len(set(labels)) != len(labels):
        labels = [f"a.{l}" for l in a.labels] + [f"b.{l}" for l in b.labels]
    n, m = a.n, b.n
    rows = [[Fraction(0)] * (n + m) for _ in range(n + m)]
    for i in range(n):
        for j in range(n):
            rows[i][j] = a.entries[i][j]
    for i in range(m):
        for j in range(m):
            rows[n + i][n + j] = b.entries[i][j]
    return BoundingMatrix(rows, labels=labels)
