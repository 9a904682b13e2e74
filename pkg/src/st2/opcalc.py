"""Operator calculus for strictly anticommuting self-adjoint families.

Everything is finite-dimensional and dense: collections validate strict
anticommutation at construction, signed fractional powers go through one
eigendecomposition each, and the assembled operator

    Dbar_t = sum_j sign(D_j) |D_j|^{t_j}

satisfies Dbar_t^2 = sum_j |D_j|^{2 t_j} whenever the family anticommutes,
which is the central cross-term cancellation this module keeps checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gamma as _gamma

from .report import DiagnosticReport, fit_summary
from .tropical import BoundingMatrix, bounding_direct_sum

__all__ = [
    "CliffordGenerators",
    "OperatorCollection",
    "assemble",
    "bounded_transform",
    "clifford_generators",
    "commutator_order_diagnostic",
    "comparison_constant",
    "conformal_guess_check",
    "delta_form",
    "direct_sum",
    "external_product",
    "interpolation_region",
    "psd_power",
    "signed_power",
    "summability_fit",
    "sww_inequality_check",
]

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _opnorm(m) -> float:
    return float(np.linalg.norm(m, 2))


def _require_hermitian(m, what="operator"):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be a square matrix")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.conj().T).max(initial=0.0) > 1e-12 * m.shape[0] * scale:
        raise ValueError(f"{what} is not Hermitian")
    return m


def _kron_chain(mats):
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


@dataclass
class CliffordGenerators:
    """A deterministic irreducible-ish family of anticommuting involutions."""

    n: int
    dim: int
    gammas: list
    grading: np.ndarray | None


def clifford_generators(n: int, qubits: int | None = None) -> CliffordGenerators:
    """n pairwise-anticommuting Hermitian involutions on (C^2)^(x q).

    Default module size is the smallest this tensor construction affords:
    q = max(1, n // 2), so n = 2 and n = 3 both live on C^2 and n = 4 on C^4.
    For odd n the last generator is the Z-chain, which uses up the would-be
    grading; passing a larger ``qubits`` keeps a grading for odd families
    (used by the lattice weight modules, which want 2^ceil(dim/2)).
    """
    if n < 1:
        raise ValueError("need at least one generator")
    if qubits is None:
        q = max(1, n // 2)
    else:
        q = int(qubits)
        if 2 * q < n:
            raise ValueError(f"{q} qubits support at most {2 * q} generators")
    use_z_chain = n == 2 * q + 1
    if qubits is None and n > 2 * q and not use_z_chain:
        raise ValueError("internal sizing error")
    eye = np.eye(2, dtype=complex)
    gammas = []
    for k in range(q):
        if len(gammas) >= n:
            break
        prefix = [_PAULI_Z] * k
        suffix = [eye] * (q - 1 - k)
        gammas.append(_kron_chain(prefix + [_PAULI_X] + suffix) if q > 1 else _PAULI_X.copy())
        if len(gammas) < n:
            gammas.append(_kron_chain(prefix + [_PAULI_Y] + suffix) if q > 1 else _PAULI_Y.copy())
    z_chain = _kron_chain([_PAULI_Z] * q) if q > 1 else _PAULI_Z.copy()
    grading = None
    if use_z_chain:
        gammas.append(z_chain)
    else:
        grading = z_chain
    return CliffordGenerators(n=n, dim=2**q, gammas=gammas, grading=grading)


class OperatorCollection:
    """Finite family of Hermitian matrices with strict pairwise anticommutation.

    Validation is eager: construction fails loudly with the worst offending
    pair if any anticommutator exceeds the tolerance (default 1e-12 scaled by
    dimension and operator size). An optional grading must be a Hermitian
    involution anticommuting with every member; an optional bounding matrix
    eps travels along for downstream diagnostics.
    """

    def __init__(self, operators, grading=None, eps: BoundingMatrix | None = None, tol: float | None = None):
        if not operators:
            raise ValueError("collection needs at least one operator")
        ops = [_require_hermitian(op, f"operator {i}") for i, op in enumerate(operators)]
        dim = ops[0].shape[0]
        if any(op.shape[0] != dim for op in ops):
            raise ValueError("all operators must share one Hilbert space")
        scale = max(1.0, max(_opnorm(op) for op in ops))
        if tol is None:
            tol = 1e-12 * dim * scale * scale
        self.operators = ops
        self.dim = dim
        self.n_ops = len(ops)
        self.tol = float(tol)
        defect, pair = self._worst_pair()
        if defect > self.tol:
            raise ValueError(
                f"anticommutation violation: pair {pair} has ||{{D_i,D_j}}|| = {defect:.3e} > tol {self.tol:.3e}"
            )
        if grading is not None:
            grading = _require_hermitian(grading, "grading")
            if _opnorm(grading @ grading - np.eye(dim)) > 1e-10 * dim:
                raise ValueError("grading must square to the identity")
            for i, op in enumerate(ops):
                if _opnorm(grading @ op + op @ grading) > max(self.tol, 1e-10 * dim * scale):
                    raise ValueError(f"grading does not anticommute with operator {i}")
        self.grading = grading
        if eps is not None and eps.n != self.n_ops:
            raise ValueError("bounding matrix size must match the number of operators")
        self.eps = eps

    def _worst_pair(self):
        worst, pair = 0.0, None
        for i in range(self.n_ops):
            for j in range(i + 1, self.n_ops):
                d = _opnorm(self.operators[i] @ self.operators[j] + self.operators[j] @ self.operators[i])
                if d >= worst:
                    worst, pair = d, (i, j)
        return worst, pair

    def max_anticommutation_defect(self) -> float:
        return self._worst_pair()[0]


def signed_power(d, t):
    """sign(D) |D|^t by the spectral theorem; kernels stay kernels (sign 0 = 0)."""
    t = float(t)
    if t <= 0:
        raise ValueError("exponent must be positive")
    d = _require_hermitian(d)
    w, u = np.linalg.eigh(d)
    vals = np.sign(w) * np.abs(w) ** t
    return (u * vals) @ u.conj().T


def psd_power(p, beta, rel_floor: float = 1e-12):
    """P^beta for PSD P with pseudo-power convention: the kernel maps to zero.

    Eigenvalues below rel_floor * max|eig| count as kernel, which keeps
    negative powers finite; tiny negative eigenvalues (roundoff) are clipped.
    """
    p = _require_hermitian(p)
    w, u = np.linalg.eigh(p)
    cut = rel_floor * max(float(np.abs(w).max(initial=0.0)), np.finfo(float).tiny)
    vals = np.zeros_like(w)
    pos = w > cut
    vals[pos] = w[pos] ** float(beta)
    return (u * vals) @ u.conj().T


def delta_form(coll: OperatorCollection, t) -> np.ndarray:
    """sum_j |D_j|^{2 t_j}."""
    t = _exponents(coll, t)
    out = np.zeros((coll.dim, coll.dim), dtype=complex)
    for tj, op in zip(t, coll.operators):
        w, u = np.linalg.eigh(op)
        out += (u * np.abs(w) ** (2 * tj)) @ u.conj().T
    return out


def assemble(coll: OperatorCollection, t, check: bool = True, tol: float | None = None) -> np.ndarray:
    """Dbar_t = sum_j sign(D_j)|D_j|^{t_j}, verifying Dbar_t^2 = Delta_t.

    The postcondition check reuses the same eigendecompositions; failure
    means the collection's anticommutation defect leaked into the assembly
    and raises with the measured discrepancy.
    """
    t = _exponents(coll, t)
    dbar = np.zeros((coll.dim, coll.dim), dtype=complex)
    delta = np.zeros((coll.dim, coll.dim), dtype=complex)
    for tj, op in zip(t, coll.operators):
        w, u = np.linalg.eigh(op)
        dbar += (u * (np.sign(w) * np.abs(w) ** tj)) @ u.conj().T
        delta += (u * np.abs(w) ** (2 * tj)) @ u.conj().T
    if check:
        if tol is None:
            tol = 1e-10 * coll.dim * max(1.0, _opnorm(delta))
        defect = _opnorm(dbar @ dbar - delta)
        if defect > tol:
            raise ValueError(
                f"assembly identity violated: ||Dbar^2 - Delta|| = {defect:.3e} > {tol:.3e} "
                f"(max anticommutation defect {coll.max_anticommutation_defect():.3e})"
            )
    return dbar


def _exponents(coll: OperatorCollection, t) -> list[float]:
    vals = [float(v) for v in t]
    if len(vals) != coll.n_ops:
        raise ValueError(f"expected {coll.n_ops} exponents, got {len(vals)}")
    if any(v <= 0 for v in vals):
        raise ValueError("exponents must be positive")
    return vals


def bounded_transform(d) -> np.ndarray:
    """F_D = D (1 + D^2)^{-1/2}; a strict contraction with F^2 - 1 = -(1+D^2)^{-1}."""
    d = _require_hermitian(d)
    w, u = np.linalg.eigh(d)
    return (u * (w / np.sqrt(1.0 + w * w))) @ u.conj().T


def sww_inequality_check(d, a, m, psd_tol: float | None = None, compute_decay: bool = False) -> DiagnosticReport:
    """Two-sided commutator bound for the bounded transform at order m.

    For anti-self-adjoint a (so [F_D, a] is Hermitian) checks

        -C (1+D^2)^{-1/(2m)}  <=  [F_D, a]  <=  C (1+D^2)^{-1/(2m)}

    with C = M * Gamma(1/(2m)) / (sqrt(pi) * Gamma(1/2 + 1/(2m))) and
    M = ||[D, a] (1+D^2)^{-1/2 + 1/(2m)}||. Optionally fits the singular-value
    decay of [F_D, a] against the growth of |D| (slope at most -1/m + 0.05);
    pointwise ratios are reported as data only, since the operator sandwich
    does not pin singular values one by one at finite dimension.
    """
    d = _require_hermitian(d)
    a = np.asarray(a, dtype=complex)
    n = d.shape[0]
    if a.shape != d.shape:
        raise ValueError("a must act on the same space as D")
    scale_a = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a + a.conj().T).max(initial=0.0) > 1e-12 * n * scale_a:
        raise ValueError("a must be anti-self-adjoint (a* = -a)")
    m = float(m)
    if m < 1:
        raise ValueError("order m must be >= 1")
    w, u = np.linalg.eigh(d)
    half = 1.0 / (2.0 * m)
    res_weight = (1.0 + w * w) ** (-0.5 + half)
    seminorm = _opnorm((d @ a - a @ d) @ ((u * res_weight) @ u.conj().T))
    constant = seminorm * _gamma(half) / (math.sqrt(math.pi) * _gamma(0.5 + half))
    f = (u * (w / np.sqrt(1.0 + w * w))) @ u.conj().T
    k = f @ a - a @ f
    k = (k + k.conj().T) / 2
    s = (u * (1.0 + w * w) ** (-half)) @ u.conj().T
    bound = constant * s
    if psd_tol is None:
        psd_tol = 1e-10 * n * max(1.0, constant)
    lo_upper = float(np.linalg.eigvalsh(bound - k).min())
    lo_lower = float(np.linalg.eigvalsh(bound + k).min())
    rep = DiagnosticReport(
        title="bounded-transform commutator sandwich",
        anchor="-C(1+D^2)^{-1/2m} <= [F_D, a] <= C(1+D^2)^{-1/2m}",
    )
    rep.data["constant"] = constant
    rep.data["seminorm"] = seminorm
    rep.data["order"] = m
    rep.add_check("psd-upper", lo_upper >= -psd_tol, value=lo_upper, threshold=-psd_tol)
    rep.add_check("psd-lower", lo_lower >= -psd_tol, value=lo_lower, threshold=-psd_tol)
    if compute_decay:
        mu_k = np.linalg.svd(k, compute_uv=False)
        lam = np.sort(np.abs(w))
        keep = (mu_k > 1e-14 * max(1.0, mu_k.max(initial=0.0))) & (lam > 0)
        fit = fit_summary(lam[keep], mu_k[keep])
        rep.fits["singular-value-decay"] = fit
        slope_ok = fit["slope"] is None or fit["slope"] <= -1.0 / m + 0.05
        rep.add_check("decay-rate", slope_ok, value=fit["slope"], threshold=-1.0 / m + 0.05)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = mu_k * lam ** (1.0 / m) / max(constant, np.finfo(float).tiny)
        rep.data["pointwise_ratio_max"] = float(np.nanmax(ratios)) if len(ratios) else 0.0
    return rep


def summability_fit(eigenvalues, p_claimed, rel_tol: float = 0.1) -> DiagnosticReport:
    """Fit the summability exponent from the spectrum of Delta_t.

    Uses the resolvent singular values mu_k = (1 + lambda_k)^{-1/2} sorted
    decreasingly and fits mu_k ~ c k^{-1/p} on the upper half of the index
    range. Requires at least 50 eigenvalues and a non-degenerate spectrum.
    """
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    if len(lam) < 50:
        raise ValueError("need at least 50 eigenvalues for a stable exponent fit")
    if lam.max() - lam.min() <= 1e-12 * (1.0 + abs(lam.max())):
        raise ValueError("degenerate spectrum: all eigenvalues coincide")
    if lam.min() < -1e-9 * max(1.0, abs(lam.max())):
        raise ValueError("spectrum must be nonnegative")
    lam = np.clip(lam, 0.0, None)
    mu = (1.0 + lam) ** -0.5
    # lam increasing makes mu decreasing, so mu[k] is already mu_k in order
    k = np.arange(1, len(lam) + 1, dtype=float)
    half = len(lam) // 2
    slope, stderr, npts = _line_fit(np.log(k[half:]), np.log(mu[half:]))
    p_hat = -1.0 / slope if slope not in (None, 0.0) else math.inf
    p_err = abs(stderr / slope**2) if slope else math.inf
    rep = DiagnosticReport(title="summability exponent", anchor="mu_k((1+Delta_t)^{-1/2}) ~ c k^{-1/p}")
    rep.fits["summability"] = {"slope": slope, "stderr": stderr, "p_hat": p_hat, "p_stderr": p_err, "npoints": npts}
    p_claimed = float(p_claimed)
    rep.add_check(
        "claimed-exponent",
        abs(p_hat - p_claimed) <= rel_tol * p_claimed,
        value=p_hat,
        threshold=p_claimed,
        detail=f"relative tolerance {rel_tol}",
    )
    return rep


def _line_fit(x, y):
    if len(x) < 2:
        return None, None, len(x)
    if len(x) == 2:
        return float((y[1] - y[0]) / (x[1] - x[0])), 0.0, 2
    coeffs, cov = np.polyfit(x, y, 1, cov=True)
    return float(coeffs[0]), float(np.sqrt(cov[0, 0])), len(x)


def _weighted_resolvent(coll: OperatorCollection, eps_row, power: float = 1.0) -> np.ndarray:
    """(1 + sum_{j: e_j > 0} |D_j|^{e_j})^{-power}; entries with e_j = 0 are omitted."""
    s = np.eye(coll.dim, dtype=complex)
    for e, op in zip(eps_row, coll.operators):
        e = float(e)
        if e > 0:
            w, u = np.linalg.eigh(op)
            s += (u * np.abs(w) ** e) @ u.conj().T
    return psd_power(s, -float(power))


def commutator_order_diagnostic(
    builder,
    index: int,
    eps_row,
    sizes,
    slope_tol: float = 0.05,
    reduction: float = 0.25,
) -> DiagnosticReport:
    """Truncation-ladder boundedness test for one row of a bounding matrix.

    ``builder(size)`` returns (collection, a) or (collection, a, interior
    projector); the diagnostic records ||P [D_index, a] R P|| along the ladder
    where R = (1 + sum_j |D_j|^{eps_row[j]})^{-1}, fits a log-log slope on the
    upper half, and declares the row sufficient when the slope is at most
    ``slope_tol``. A second pass with every positive entry reduced by
    ``reduction`` (floored at 0) is reported so callers can see the expected
    divergence when the row is actually needed.
    """
    sizes = [int(s) for s in sizes]
    if sorted(sizes) != sizes or len(sizes) < 2:
        raise ValueError("sizes must be a strictly increasing ladder of length >= 2")
    eps_row = [float(e) for e in eps_row]
    reduced_row = [max(e - reduction, 0.0) if e > 0 else 0.0 for e in eps_row]
    norms, reduced_norms = [], []
    for size in sizes:
        out = builder(size)
        coll, a = out[0], out[1]
        interior = out[2] if len(out) > 2 else None
        if len(eps_row) != coll.n_ops:
            raise ValueError("eps_row length must match the collection")
        k = coll.operators[index] @ a - a @ coll.operators[index]
        for row, acc in ((eps_row, norms), (reduced_row, reduced_norms)):
            kr = k @ _weighted_resolvent(coll, row)
            if interior is not None:
                kr = interior @ kr @ interior
            acc.append(_opnorm(kr))
    rep = DiagnosticReport(
        title="commutator order diagnostic",
        anchor="[D_i, a](1 + sum_j |D_j|^{eps_ij})^{-1} bounded",
    )
    rep.data["sizes"] = sizes
    rep.data["norms"] = norms
    rep.data["reduced_norms"] = reduced_norms
    rep.data["eps_row"] = eps_row
    rep.fits["main"] = _ladder_fit(sizes, norms)
    rep.fits["reduced"] = _ladder_fit(sizes, reduced_norms)
    slope = rep.fits["main"]["slope"]
    rep.add_check("bounded", slope is None or slope <= slope_tol, value=slope, threshold=slope_tol)
    return rep


def _ladder_fit(sizes, norms) -> dict:
    scale = max(norms) if norms else 0.0
    if scale <= 1e-13:
        return {"slope": None, "stderr": None, "npoints": len(norms), "all_zero": True}
    return fit_summary(sizes, norms)


def conformal_guess_check(builder, t, eps, sizes, slope_tol: float = 0.05) -> DiagnosticReport:
    """Check a proposed conformal-equivalence family (U_g, mu_g) along a ladder.

    For each size, ``builder(size)`` returns (collection, [(U, mu), ...]).
    Two series are tracked per ladder rung (max over samples and operator
    indices): the twisted commutator ||[D_i, mu] R_i|| and the equivariance
    defect ||(U T_i U* - mu T_i mu*) R_i^{t_i}|| where T_i = sign(D_i)|D_i|^{t_i}
    and R_i is the weighted resolvent of row i. Bounded slopes (<= slope_tol)
    on both series support the guess.
    """
    if isinstance(eps, BoundingMatrix):
        rows = [[float(v) for v in row] for row in eps.entries]
    else:
        rows = [[float(v) for v in row] for row in eps]
    sizes = [int(s) for s in sizes]
    t = [float(v) for v in t]
    comm_series, twist_series = [], []
    for size in sizes:
        coll, samples = builder(size)
        worst_comm, worst_twist = 0.0, 0.0
        for i, op in enumerate(coll.operators):
            r1 = _weighted_resolvent(coll, rows[i], power=1.0)
            rt = _weighted_resolvent(coll, rows[i], power=t[i])
            ti_op = signed_power(op, t[i])
            for u_g, mu_g in samples:
                u_g = np.asarray(u_g, dtype=complex)
                mu_g = np.asarray(mu_g, dtype=complex)
                worst_comm = max(worst_comm, _opnorm((op @ mu_g - mu_g @ op) @ r1))
                twisted = u_g @ ti_op @ u_g.conj().T - mu_g @ ti_op @ mu_g.conj().T
                worst_twist = max(worst_twist, _opnorm(twisted @ rt))
        comm_series.append(worst_comm)
        twist_series.append(worst_twist)
    rep = DiagnosticReport(
        title="conformal factor guess",
        anchor="U_g Dbar_t U_g* ~ mu_g Dbar_t mu_g*",
    )
    rep.data["sizes"] = sizes
    rep.data["commutator_norms"] = comm_series
    rep.data["twisted_norms"] = twist_series
    rep.fits["commutator"] = _ladder_fit(sizes, comm_series)
    rep.fits["twisted"] = _ladder_fit(sizes, twist_series)
    for name in ("commutator", "twisted"):
        slope = rep.fits[name]["slope"]
        rep.add_check(f"{name}-bounded", slope is None or slope <= slope_tol, value=slope, threshold=slope_tol)
    return rep


def external_product(c1: OperatorCollection, c2: OperatorCollection) -> OperatorCollection:
    """Graded external product; the parity table decides the twisting factor.

    graded x graded     -> (D (x) 1, gamma_1 (x) D'), grading gamma_1 (x) gamma_2
    graded x ungraded   -> (D (x) 1, gamma_1 (x) D'), ungraded
    ungraded x graded   -> (D (x) gamma_2, 1 (x) D'), ungraded
    ungraded x ungraded -> auxiliary C^2 with sigma_x / sigma_y twists,
                           grading 1 (x) 1 (x) sigma_z
    """
    i1 = np.eye(c1.dim, dtype=complex)
    i2 = np.eye(c2.dim, dtype=complex)
    if c1.grading is not None and c2.grading is not None:
        left = [np.kron(op, i2) for op in c1.operators]
        right = [np.kron(c1.grading, op) for op in c2.operators]
        grading = np.kron(c1.grading, c2.grading)
    elif c1.grading is not None:
        left = [np.kron(op, i2) for op in c1.operators]
        right = [np.kron(c1.grading, op) for op in c2.operators]
        grading = None
    elif c2.grading is not None:
        left = [np.kron(op, c2.grading) for op in c1.operators]
        right = [np.kron(i1, op) for op in c2.operators]
        grading = None
    else:
        left = [np.kron(np.kron(op, i2), _PAULI_X) for op in c1.operators]
        right = [np.kron(np.kron(i1, op), _PAULI_Y) for op in c2.operators]
        grading = np.kron(np.kron(i1, i2), _PAULI_Z)
    eps = None
    if c1.eps is not None and c2.eps is not None:
        eps = bounding_direct_sum(c1.eps, c2.eps)
    return OperatorCollection(left + right, grading=grading, eps=eps)


def direct_sum(c1: OperatorCollection, c2: OperatorCollection) -> OperatorCollection:
    """Summand-wise direct sum of two families over the same index set.

    Requires matching operator counts; the bounding matrix of the sum is the
    entrywise maximum (each block must satisfy its own bound).
    """
    if c1.n_ops != c2.n_ops:
        raise ValueError("direct sum needs matching operator families")
    ops = []
    for a, b in zip(c1.operators, c2.operators):
        block = np.zeros((c1.dim + c2.dim, c1.dim + c2.dim), dtype=complex)
        block[: c1.dim, : c1.dim] = a
        block[c1.dim :, c1.dim :] = b
        ops.append(block)
    grading = None
    if c1.grading is not None and c2.grading is not None:
        grading = np.zeros_like(ops[0])
        grading[: c1.dim, : c1.dim] = c1.grading
        grading[c1.dim :, c1.dim :] = c2.grading
    eps = None
    if c1.eps is not None and c2.eps is not None:
        rows = [
            [max(c1.eps.entries[i][j], c2.eps.entries[i][j]) for j in range(c1.n_ops)]
            for i in range(c1.n_ops)
        ]
        eps = BoundingMatrix(rows, labels=c1.eps.labels)
    return OperatorCollection(ops, grading=grading, eps=eps)


def comparison_constant(n: int, sigma, tau):
    """Constant for (1 + Delta_s)^sigma <= C (1 + Delta_t)^tau when sigma*s <= tau*t.

    Proof sketch: with T = 1 + sum_i x_i^{t_i} >= 1 one has x_i^{s_i} <=
    T^{s_i/t_i} <= T^{tau/sigma}, so 1 + sum_i x_i^{s_i} <= (n+1) T^{tau/sigma};
    raising to sigma gives C = (n+1)^sigma independent of tau.
    """
    if n < 1:
        raise ValueError("need at least one operator")
    if sigma <= 0 or tau <= 0:
        raise ValueError("exponents must be positive")
    return (n + 1) ** sigma


def interpolation_region(
    A,
    B,
    T,
    alpha_grid,
    beta_grid,
    y_range=(-6.0, 6.0),
    y_count: int = 201,
    slack: float = 1e-9,
) -> DiagnosticReport:
    """Map the bounded region of (alpha, beta) -> ||[A|A|^{-1+alpha}, T] B^{-beta}||.

    A and B must commute (joint diagonalization within tolerance) and B >= 1.
    Near-kernel eigenvalues of A are floored at 1e-8 * max|a| (recorded as
    ``delta_used``) so the analytic family stays well-defined.

    Two families of checks run:
      * Hadamard three-line bound on all strictly increasing alpha-triples of
        the PAIRED grid points (alpha_k, beta_k), with line suprema
        M_k = sup_y e^{alpha_k^2 - y^2} N(alpha_k + iy, beta_k) taken over the
        pinned y grid plus a local refinement near the argmax (refinement only
        raises M_k, so it cannot create false violations).
      * near-convexity of sub-level sets: from any paired point (a1, b1) and
        the origin, every (a2, b2) with 0 < a2 < a1, b2 >= a2 b1 / a1 obeys
        the two-point interpolation bound; the beta direction is verified via
        monotonicity (B >= 1 makes N nonincreasing in beta).
    """
    A = _require_hermitian(A, "A")
    B = _require_hermitian(B, "B")
    T = np.asarray(T, dtype=complex)
    n = A.shape[0]
    if T.shape != A.shape or B.shape != A.shape:
        raise ValueError("A, B, T must share one space")
    a_diag, b_diag, u = _joint_eigenbasis(A, B)
    if b_diag.min() < 1.0 - 1e-9:
        raise ValueError(f"B must be >= 1, smallest joint eigenvalue {b_diag.min():.6g}")
    t_tilde = u.conj().T @ T @ u
    amax = float(np.abs(a_diag).max())
    if amax == 0.0:
        raise ValueError("A must be nonzero")
    delta = 1e-8 * amax
    floored = np.abs(a_diag) < delta
    sg = np.where(a_diag >= 0, 1.0, -1.0)
    mag = np.maximum(np.abs(a_diag), delta)
    la = np.log(mag)
    lb = np.log(b_diag)

    def batch_norms(alphas, ys, betas):
        """||K|| for parallel arrays of evaluation points."""
        alphas = np.asarray(alphas, dtype=float)
        ys = np.asarray(ys, dtype=float)
        betas = np.asarray(betas, dtype=float)
        out = np.empty(len(alphas))
        chunk = max(1, int(2**24 / (16 * n * n)))
        for lo in range(0, len(alphas), chunk):
            hi = min(lo + chunk, len(alphas))
            g = sg[None, :] * np.exp(alphas[lo:hi, None] * la[None, :] + 1j * ys[lo:hi, None] * la[None, :])
            k = (g[:, :, None] - g[:, None, :]) * t_tilde[None, :, :]
            k = k * np.exp(-betas[lo:hi, None] * lb[None, :])[:, None, :]
            out[lo:hi] = np.linalg.svd(k, compute_uv=False)[:, 0]
        return out

    alpha_grid = np.asarray(alpha_grid, dtype=float)
    beta_grid = np.asarray(beta_grid, dtype=float)
    aa, bb = np.meshgrid(alpha_grid, beta_grid, indexing="ij")
    n_table = batch_norms(aa.ravel(), np.zeros(aa.size), bb.ravel()).reshape(aa.shape)

    ys = np.linspace(y_range[0], y_range[1], y_count)

    def line_sup(alpha, beta):
        vals = np.exp(alpha**2 - ys**2) * batch_norms(np.full(y_count, alpha), ys, np.full(y_count, beta))
        i = int(np.argmax(vals))
        dy = ys[1] - ys[0] if y_count > 1 else 1.0
        fine = np.linspace(ys[i] - dy, ys[i] + dy, 41)
        fvals = np.exp(alpha**2 - fine**2) * batch_norms(np.full(41, alpha), fine, np.full(41, beta))
        return max(float(vals.max()), float(fvals.max()))

    k_pairs = min(len(alpha_grid), len(beta_grid))
    pairs = sorted(zip(alpha_grid[:k_pairs], beta_grid[:k_pairs]))
    m_values = [line_sup(al, be) for al, be in pairs]
    m_origin = line_sup(0.0, 0.0)

    rep = DiagnosticReport(
        title="interpolation region",
        anchor="N(alpha_2, gamma) <= e^{-alpha_2^2} M_1^{theta_1} M_3^{theta_3}",
    )
    rep.data["alpha_grid"] = alpha_grid.tolist()
    rep.data["beta_grid"] = beta_grid.tolist()
    rep.data["n_table"] = n_table.tolist()
    rep.data["pairs"] = [[float(a), float(b)] for a, b in pairs]
    rep.data["m_values"] = m_values
    rep.data["m_origin"] = m_origin
    rep.data["delta_used"] = float(delta) if bool(floored.any()) else 0.0

    # Hadamard triples over the paired points
    triple_pts, triple_alphas, triple_gammas, triple_bounds = [], [], [], []
    for i1 in range(len(pairs)):
        for i2 in range(i1 + 1, len(pairs)):
            for i3 in range(i2 + 1, len(pairs)):
                a1, b1 = pairs[i1]
                a2, b2 = pairs[i2]
                a3, b3 = pairs[i3]
                if not (a1 < a2 < a3):
                    continue
                th1 = (a3 - a2) / (a3 - a1)
                th3 = (a2 - a1) / (a3 - a1)
                gamma_b = th1 * b1 + th3 * b3
                bound = math.exp(-(a2**2)) * m_values[i1] ** th1 * m_values[i3] ** th3
                triple_pts.append((i1, i2, i3))
                triple_alphas.append(a2)
                triple_gammas.append(gamma_b)
                triple_bounds.append(bound)
    had_viol = []
    if triple_pts:
        lhs = batch_norms(triple_alphas, np.zeros(len(triple_alphas)), triple_gammas)
        for pt, l, bd in zip(triple_pts, lhs, triple_bounds):
            if l > bd + slack * (1.0 + bd):
                had_viol.append({"triple": list(pt), "lhs": float(l), "bound": float(bd)})
    rep.data["hadamard_triples"] = len(triple_pts)
    rep.data["hadamard_violations"] = had_viol[:10]
    rep.add_check("hadamard-triples", len(had_viol) == 0, value=len(had_viol), threshold=0)

    # near-convexity of sub-level sets via the two-point bound from the origin
    shape_alphas, shape_gammas, shape_bounds, shape_tags = [], [], [], []
    for k, (a1, b1) in enumerate(pairs):
        if a1 <= 0:
            continue
        for a2 in alpha_grid:
            if not 0.0 < a2 < a1 - 1e-12:
                continue
            th = a2 / a1
            g_b = th * b1
            bound = math.exp(-(a2**2)) * m_origin ** (1.0 - th) * m_values[k] ** th
            shape_alphas.append(a2)
            shape_gammas.append(g_b)
            shape_bounds.append(bound)
            shape_tags.append((k, float(a2)))
    shape_viol = []
    if shape_alphas:
        lhs = batch_norms(shape_alphas, np.zeros(len(shape_alphas)), shape_gammas)
        for tag, a2, g_b, l, bd in zip(shape_tags, shape_alphas, shape_gammas, lhs, shape_bounds):
            if l > bd + slack * (1.0 + bd):
                shape_viol.append({"pair": tag[0], "alpha2": a2, "gamma": g_b, "lhs": float(l), "bound": float(bd)})
                continue
            # beta-monotonicity above the ray: N(alpha2, beta2) <= N(alpha2, gamma)
            betas_above = [b for b in beta_grid if b > g_b]
            if betas_above:
                vals = batch_norms(np.full(len(betas_above), a2), np.zeros(len(betas_above)), betas_above)
                worst = float(vals.max())
                if worst > l + slack * (1.0 + l):
                    shape_viol.append({"pair": tag[0], "alpha2": a2, "monotone_break": worst, "at_gamma": float(l)})
    rep.data["region_points"] = len(shape_alphas)
    rep.data["region_violations"] = shape_viol[:10]
    rep.add_check("region-shape", len(shape_viol) == 0, value=len(shape_viol), threshold=0)
    return rep


def _joint_eigenbasis(A, B):
    """Diagonalize commuting Hermitian A, B; error out if they truly don't commute."""
    n = A.shape[0]
    scale = max(1.0, _opnorm(A)) * max(1.0, _opnorm(B))
    if _opnorm(A @ B - B @ A) > 1e-9 * n * scale:
        raise ValueError("A and B must commute")
    wa, u = np.linalg.eigh(A)
    bt = u.conj().T @ B @ u
    # rediagonalize inside near-degenerate blocks of A
    gap_tol = 1e-10 * max(1.0, float(np.abs(wa).max()))
    start = 0
    for i in range(1, n + 1):
        if i == n or wa[i] - wa[i - 1] > gap_tol:
            if i - start > 1:
                _, v = np.linalg.eigh(bt[start:i, start:i])
                u[:, start:i] = u[:, start:i] @ v
            start = i
    bt = u.conj().T @ B @ u
    off = bt - np.diag(np.diag(bt))
    if np.abs(off).max(initial=0.0) > 1e-8 * max(1.0, _opnorm(B)):
        raise ValueError("A and B could not be jointly diagonalized")
    return wa, np.real(np.diag(bt)).copy(), u
