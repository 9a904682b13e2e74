"""Finite Hilbert complexes and their mixed-order Laplacian calculus.

A complex here is a chain of finite-dimensional spaces with differentials
composing to zero exactly: random instances are built in structural form
(each differential reads only the coordinates its predecessor cannot write),
so downstream anticommutation identities hold to the last float bit. Each
differential carries an order m_i >= 1; the mixed-order Laplacians

    L_i = (d_i^* d_i)^{a_i} + (d_{i-1} d_{i-1}^*)^{a_{i-1}},  a_i = m / m_i,

with m the product of all orders, share one homogeneity degree 2m, which is
what makes the fractional-power bookkeeping below close up.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .opcalc import OperatorCollection, psd_power
from .report import DiagnosticReport
from .tropical import BoundingMatrix, _coerce_entry, cone_contains

__all__ = [
    "ConformalFactorSpec",
    "FiniteHilbertComplex",
    "HodgeData",
    "assembled_formula_check",
    "complex_from_json",
    "complex_to_json",
    "conformal_factor_assemble",
    "hodge_decomposition",
    "random_complex",
    "rumin_laplacians",
    "signed_power_identity_check",
    "to_collection",
    "validate",
]


@dataclass(frozen=True, eq=False)
class FiniteHilbertComplex:
    """dims: n+1 space dimensions; differentials: n maps d_i: H_i -> H_{i+1};
    orders: n rationals m_i >= 1."""

    dims: tuple
    differentials: tuple
    orders: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        diffs = tuple(np.asarray(d, dtype=complex) for d in self.differentials)
        orders = tuple(_coerce_entry(m) for m in self.orders)
        if len(dims) != len(diffs) + 1:
            raise ValueError("need one more space than differentials")
        if any(d < 0 for d in dims):
            raise ValueError("dimensions must be nonnegative")
        for i, d in enumerate(diffs):
            if d.shape != (dims[i + 1], dims[i]):
                raise ValueError(
                    f"differential {i} has shape {d.shape}, expected {(dims[i + 1], dims[i])}"
                )
        if any(m < 1 for m in orders):
            raise ValueError("orders must be at least 1")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "differentials", diffs)
        object.__setattr__(self, "orders", orders)

    @property
    def n_diffs(self) -> int:
        return len(self.differentials)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def order_product(self) -> Fraction:
        out = Fraction(1)
        for m in self.orders:
            out *= Fraction(m)
        return out

    def power_ratios(self):
        """a_i = m / m_i with m the product of all orders."""
        m = self.order_product
        return tuple(m / Fraction(mi) for mi in self.orders)

    def offsets(self):
        out = [0]
        for d in self.dims:
            out.append(out[-1] + d)
        return out

    def embed(self, level: int, block) -> np.ndarray:
        """Place an endomorphism of H_level into the total space."""
        off = self.offsets()
        out = np.zeros((self.total_dim, self.total_dim), dtype=complex)
        block = np.asarray(block, dtype=complex)
        if block.shape != (self.dims[level], self.dims[level]):
            raise ValueError(f"expected an endomorphism of H_{level}")
        out[off[level] : off[level + 1], off[level] : off[level + 1]] = block
        return out

    def embed_differential(self, i: int) -> np.ndarray:
        """Place d_i (block H_{i+1} <- H_i) into the total space."""
        off = self.offsets()
        out = np.zeros((self.total_dim, self.total_dim), dtype=complex)
        out[off[i + 1] : off[i + 2], off[i] : off[i + 1]] = self.differentials[i]
        return out


def random_complex(rng, dims, orders, ranks=None) -> FiniteHilbertComplex:
    """Structural random complex with exact d^2 = 0.

    Coordinates of H_i split as (p_i, q_i) where p_i is the number reachable
    by d_{i-1}; each d_i reads only the q_i tail and writes only the p_{i+1}
    head, so consecutive products vanish identically in floating point.
    ranks[i] prescribes rank d_i (p_{i+1} = ranks[i]); defaults are drawn
    from rng within feasibility.
    """
    dims = tuple(int(d) for d in dims)
    n = len(dims) - 1
    if ranks is not None and len(ranks) != n:
        raise ValueError("need one rank per differential")
    p = [0]
    for i in range(n):
        q_i = dims[i] - p[i]
        limit = min(q_i, dims[i + 1])
        if ranks is None:
            r = int(rng.integers(0, limit + 1))
        else:
            r = int(ranks[i])
            if r < 0 or r > limit:
                raise ValueError(f"rank {r} for differential {i} exceeds feasible limit {limit}")
        p.append(r)
    diffs = []
    for i in range(n):
        q_i = dims[i] - p[i]
        d = np.zeros((dims[i + 1], dims[i]), dtype=complex)
        if p[i + 1] > 0:
            c = rng.standard_normal((p[i + 1], q_i)) + 1j * rng.standard_normal((p[i + 1], q_i))
            d[: p[i + 1], p[i] :] = c
        diffs.append(d)
    return FiniteHilbertComplex(dims=dims, differentials=tuple(diffs), orders=tuple(orders))


def validate(c: FiniteHilbertComplex, tol: float | None = None) -> DiagnosticReport:
    """Composition-zero and chain-consistency checks; shapes and order bounds
    were already enforced at construction."""
    rep = DiagnosticReport(title="complex validation", anchor="d_{i+1} d_i = 0")
    worst, worst_pair = 0.0, None
    for i in range(c.n_diffs - 1):
        a, b = c.differentials[i + 1], c.differentials[i]
        scale = max(1.0, float(np.abs(a).max(initial=0.0) * np.abs(b).max(initial=0.0)))
        entry = float(np.abs(a @ b).max(initial=0.0))
        if tol is None:
            pair_tol = 1e-12 * c.dims[i + 1] * scale
        else:
            pair_tol = tol
        if entry >= worst:
            worst, worst_pair = entry, (i, pair_tol)
    if worst_pair is None:
        rep.add_check("composition-zero", True, value=0.0, threshold=0.0)
    else:
        rep.add_check(
            "composition-zero",
            worst <= worst_pair[1],
            value=worst,
            threshold=worst_pair[1],
            detail=f"worst at composition {worst_pair[0]}",
        )
    rep.add_check("dimension-chain", True, value=c.total_dim)
    rep.data["dims"] = list(c.dims)
    rep.data["orders"] = [str(m) for m in c.orders]
    return rep


def rumin_laplacians(c: FiniteHilbertComplex) -> list:
    """Per-level mixed-order Laplacians, all homogeneous of one degree."""
    a = [float(x) for x in c.power_ratios()]
    out = []
    for i in range(len(c.dims)):
        lap = np.zeros((c.dims[i], c.dims[i]), dtype=complex)
        if i < c.n_diffs:
            d = c.differentials[i]
            lap += psd_power(d.conj().T @ d, a[i])
        if i > 0:
            d = c.differentials[i - 1]
            lap += psd_power(d @ d.conj().T, a[i - 1])
        out.append(lap)
    return out


class HodgeData(NamedTuple):
    harmonic: np.ndarray
    exact: np.ndarray
    coexact: np.ndarray
    betti: int


def hodge_decomposition(c: FiniteHilbertComplex, i: int) -> HodgeData:
    """Orthogonal projectors onto Ran d_{i-1}, Ran d_i^*, and their joint
    complement, whose dimension is the i-th Betti number."""
    dim = c.dims[i]
    exact = np.zeros((dim, dim), dtype=complex)
    coexact = np.zeros((dim, dim), dtype=complex)
    if i > 0:
        exact = _range_projector(c.differentials[i - 1])
    if i < c.n_diffs:
        coexact = _range_projector(c.differentials[i].conj().T)
    harmonic = np.eye(dim) - exact - coexact
    betti = dim - _rank(c.differentials[i - 1]) if i > 0 else dim
    if i < c.n_diffs:
        betti -= _rank(c.differentials[i])
    return HodgeData(harmonic=harmonic, exact=exact, coexact=coexact, betti=betti)


def _svd_cut(m):
    u, s, vh = np.linalg.svd(np.asarray(m, dtype=complex), full_matrices=False)
    cut = max(m.shape) * np.finfo(float).eps * (s[0] if len(s) else 0.0)
    return u, s, vh, s > max(cut, 1e-13 * (s[0] if len(s) else 1.0))

def _range_projector(m) -> np.ndarray:
    u, _, _, keep = _svd_cut(m)
    ur = u[:, keep]
    return ur @ ur.conj().T


def _rank(m) -> int:
    _, _, _, keep = _svd_cut(m)
    return int(keep.sum())


def to_collection(c: FiniteHilbertComplex, partition=None, grading: bool = True) -> OperatorCollection:
    """Strictly anticommuting family on the total space.

    Each group of the partition (default: one group per differential)
    contributes sum_{i in group}(d_i + d_i^*); groups may only merge
    differentials of equal order. Bounding matrix entries between groups I, J
    are (m_I - 1)/m_J when the groups touch (some indices within distance 1)
    and 0 otherwise; the grading, when requested, is parity of the level.
    """
    if partition is None:
        partition = [[i] for i in range(c.n_diffs)]
    groups = [sorted(int(i) for i in g) for g in partition]
    flat = sorted(i for g in groups for i in g)
    if flat != list(range(c.n_diffs)):
        raise ValueError("partition must cover every differential exactly once")
    group_orders = []
    for g in groups:
        orders = {c.orders[i] for i in g}
        if len(orders) > 1:
            raise ValueError(f"group {g} mixes distinct orders {sorted(map(str, orders))}")
        group_orders.append(next(iter(orders)))
    groups_sorted = sorted(zip(groups, group_orders), key=lambda t: t[0][0])
    ops = []
    for g, _ in groups_sorted:
        op = np.zeros((c.total_dim, c.total_dim), dtype=complex)
        for i in g:
            e = c.embed_differential(i)
            op += e + e.conj().T
        ops.append(op)
    rows = []
    for gi, mi in groups_sorted:
        row = []
        for gj, mj in groups_sorted:
            touching = any(abs(a - b) <= 1 for a in gi for b in gj)
            row.append((Fraction(mi) - 1) / Fraction(mj) if touching else Fraction(0))
        rows.append(row)
    eps = BoundingMatrix(rows, labels=[f"D{k}" for k in range(len(groups_sorted))])
    gamma = None
    if grading:
        signs = np.concatenate([np.full(d, (-1.0) ** i) for i, d in enumerate(c.dims)])
        gamma = np.diag(signs.astype(complex))
    return OperatorCollection(ops, grading=gamma, eps=eps)


def signed_power_identity_check(c: FiniteHilbertComplex, i: int, alpha) -> DiagnosticReport:
    """D_i |D_i|^alpha against the two-Laplacian expression.

    With a_i = m/m_i, the claim is
        D_i |D_i|^alpha = D_i (L_{i+1}^{alpha/(2 a_i)} + L_i^{alpha/(2 a_i)})
    where L are the per-level mixed-order Laplacians embedded in the total
    space; kernels use the zero-power-is-range-projector convention.
    """
    alpha = float(alpha)
    if not 0 <= i < c.n_diffs:
        raise ValueError("differential index out of range")
    e = c.embed_differential(i)
    d_op = e + e.conj().T
    lhs = d_op @ psd_power(d_op @ d_op, alpha / 2.0)
    a_i = float(c.power_ratios()[i])
    laps = rumin_laplacians(c)
    beta = alpha / (2.0 * a_i)
    rhs = d_op @ (
        psd_power(c.embed(i + 1, laps[i + 1]), beta) + psd_power(c.embed(i, laps[i]), beta)
    )
    scale = max(1.0, float(np.abs(lhs).max(initial=0.0)))
    diff = float(np.abs(lhs - rhs).max(initial=0.0))
    tol = 1e-10 * c.total_dim * scale
    rep = DiagnosticReport(
        title="signed power identity",
        anchor="D_i |D_i|^a = D_i (L_{i+1}^{a/2a_i} + L_i^{a/2a_i})",
    )
    rep.add_check("identity", diff <= tol, value=diff, threshold=tol)
    rep.data["alpha"] = alpha
    rep.data["index"] = i
    return rep


def assembled_formula_check(c: FiniteHilbertComplex, tau) -> DiagnosticReport:
    """Assembled operator at prescribed order tau against the closed form

        sum_i d_i L_i^{(tau - m_i)/2m} + d_i^* L_{i+1}^{(tau - m_i)/2m}

    with exponents t_i = tau/m_i on the collection side.
    """
    tau = float(tau)
    if tau <= 0:
        raise ValueError("tau must be positive")
    from .opcalc import assemble

    coll = to_collection(c, grading=False)
    t = [tau / float(m) for m in c.orders]
    lhs = assemble(coll, t, check=True)
    m_total = float(c.order_product)
    laps = rumin_laplacians(c)
    rhs = np.zeros_like(lhs)
    for i in range(c.n_diffs):
        beta = (tau - float(c.orders[i])) / (2.0 * m_total)
        e = c.embed_differential(i)
        rhs += e @ psd_power(c.embed(i, laps[i]), beta)
        rhs += e.conj().T @ psd_power(c.embed(i + 1, laps[i + 1]), beta)
    scale = max(1.0, float(np.abs(lhs).max(initial=0.0)))
    diff = float(np.abs(lhs - rhs).max(initial=0.0))
    # negative Laplacian powers (tau < m_i) amplify roundoff near the
    # spectral floor, so this dual-route comparison gets a looser gate than
    # the plain assembly identity
    tol = 1e-8 * c.total_dim * scale
    rep = DiagnosticReport(
        title="assembled closed form",
        anchor="Dbar_t = sum_i d_i L_i^{(tau-m_i)/2m} + d_i* L_{i+1}^{(tau-m_i)/2m}",
    )
    rep.add_check("closed-form", diff <= tol, value=diff, threshold=tol)
    rep.data["tau"] = tau
    rep.data["max_difference"] = diff
    rep.data["exponents"] = t
    return rep


class ConformalFactorSpec:
    """Per-level positive factors (scalars, or equal-length diagonal vectors
    when every level has the same dimension) plus the exponent direction s."""

    def __init__(self, lambdas, s):
        self.lambdas = tuple(lambdas)
        self.s = tuple(float(v) for v in s)
        if any(v <= 0 for v in self.s):
            raise ValueError("exponent direction must be positive")
        for lam in self.lambdas:
            arr = np.asarray(lam, dtype=float)
            if arr.ndim not in (0, 1):
                raise ValueError("factors must be scalars or diagonal vectors")
            if np.any(arr <= 0):
                raise ValueError("factors must be positive")

    @property
    def is_scalar(self) -> bool:
        return all(np.asarray(lam).ndim == 0 for lam in self.lambdas)

    def bind(self, c: FiniteHilbertComplex):
        """Resolve factors against a complex: one per level, and diagonal
        vectors only when all level dimensions coincide."""
        if len(self.lambdas) != len(c.dims):
            raise ValueError(f"need {len(c.dims)} factors, got {len(self.lambdas)}")
        if len(self.s) != c.n_diffs:
            raise ValueError(f"need {c.n_diffs} exponents, got {len(self.s)}")
        out = []
        for lam in self.lambdas:
            arr = np.asarray(lam, dtype=float)
            if arr.ndim == 1:
                if len(set(c.dims)) != 1 or arr.shape[0] != c.dims[0]:
                    raise ValueError(
                        "diagonal factors require all level dimensions equal to the vector length"
                    )
            out.append(arr)
        return out


def conformal_factor_assemble(
    c: FiniteHilbertComplex,
    spec: ConformalFactorSpec,
    t=None,
    tau=None,
    rel_tol: float = 1e-9,
):
    """Projector-weighted conformal factor and its compatibility report.

    On level j the factor acts as P_harm + P_ex r_{j-1}^{t_{j-1}/2} P_ex +
    P_co r_j^{t_j/2} P_co with r_j = lambda_{j+1}^{-1} lambda_j. With tau
    given, t = tau * s and the scalar compatibility chain
    lambda_{j-1}^{s_{j-1}} lambda_{j+1}^{s_j} = lambda_j^{s_j + s_{j-1}}
    is checked; when it holds, all chain values r_j^{tau s_j} coincide and
    the single scalar is reported as data["mu_scalar"].
    """
    lams = spec.bind(c)
    from .tropical import complex_bounding_matrix

    eps = complex_bounding_matrix(c.orders)
    if not cone_contains(eps, spec.s):
        raise ValueError("exponent direction s lies outside the admissible cone")
    if (t is None) == (tau is None):
        raise ValueError("pass exactly one of t, tau")
    if tau is not None:
        tau = float(tau)
        if tau <= 0:
            raise ValueError("tau must be positive")
        t = [tau * sj for sj in spec.s]
    t = [float(v) for v in t]
    if len(t) != c.n_diffs:
        raise ValueError("need one exponent per differential")

    rep = DiagnosticReport(
        title="conformal factor assembly",
        anchor="mu = P_harm + P_ex r^{t/2} P_ex + P_co r^{t/2} P_co",
    )
    degenerate = [i for i, d in enumerate(c.differentials) if _rank(d) == 0]
    rep.data["degenerate_degrees"] = degenerate

    # compatibility of the factor family along interior levels
    bad = []
    worst = 0.0
    for j in range(1, len(c.dims) - 1):
        lhs = lams[j - 1] ** spec.s[j - 1] * lams[j + 1] ** spec.s[j]
        rhs = lams[j] ** (spec.s[j] + spec.s[j - 1])
        err = float(np.max(np.abs(lhs / rhs - 1.0)))
        worst = max(worst, err)
        if err > rel_tol:
            bad.append(j)
    rep.add_check(
        "compatibility",
        not bad,
        value=worst,
        threshold=rel_tol,
        detail=", ".join(f"j={j}" for j in bad) if bad else None,
    )

    if tau is not None and spec.is_scalar:
        chain = [float(lams[j] / lams[j + 1]) ** (tau * spec.s[j]) for j in range(c.n_diffs)]
        rep.data["chain_values"] = chain
        if not bad:
            spread = max(chain) / min(chain) - 1.0
            rep.add_check("chain-collapse", spread <= rel_tol, value=spread, threshold=rel_tol)
            rep.data["mu_scalar"] = chain[0]

    mu = np.zeros((c.total_dim, c.total_dim), dtype=complex)
    off = c.offsets()
    for j in range(len(c.dims)):
        h = hodge_decomposition(c, j)
        block = h.harmonic.astype(complex).copy()
        if j > 0:
            ratio = _factor_power(lams[j - 1], lams[j], t[j - 1] / 2.0, c.dims[j])
            block += h.exact @ ratio @ h.exact
        if j < c.n_diffs:
            ratio = _factor_power(lams[j], lams[j + 1], t[j] / 2.0, c.dims[j])
            block += h.coexact @ ratio @ h.coexact
        mu[off[j] : off[j + 1], off[j] : off[j + 1]] = block
    return mu, rep


def _factor_power(num, den, power, dim) -> np.ndarray:
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    vals = (num / den) ** power
    if vals.ndim == 0:
        return float(vals) * np.eye(dim)
    return np.diag(vals)


def complex_to_json(c: FiniteHilbertComplex) -> dict:
    return {
        "dims": list(c.dims),
        "orders": [str(m) for m in c.orders],
        "differentials": [
            {"real": np.real(d).tolist(), "imag": np.imag(d).tolist()}
            for d in c.differentials
        ],
    }


def complex_from_json(blob: dict) -> FiniteHilbertComplex:
    diffs = tuple(
        np.asarray(d["real"], dtype=float) + 1j * np.asarray(d["imag"], dtype=float)
        for d in blob["differentials"]
    )
    return FiniteHilbertComplex(
        dims=tuple(blob["dims"]),
        differentials=diffs,
        orders=tuple(Fraction(m) for m in blob["orders"]),
    )
