"""Commutator growth under group actions: torus truncations and flows.

Four model families share one question -- how fast does ||[D, a_g]|| grow in
the group variable -- and one answer, a polynomial degree that becomes the
off-diagonal entry of a two-operator bounding matrix:

  * integer matrices acting on a (possibly phase-twisted) torus, where the
    commutator norm on the Fourier truncation has the closed form
    ``scale * ||V A^n x||`` and the degree is the unipotency step of A;
  * the same action seen classically through pulled-back trig polynomials;
  * Moebius transformations of the round sphere, where the sup of the
    conjugation jacobian is explicit per conjugacy class;
  * one-parameter flows exp(tX) on nilpotent directions, where Ad_{exp tX}
    is the finite sum of t^k ad_X^k / k!.

Truncations use hard Fourier windows: an application that would shift a mode
past the window simply drops that entry, and norms are norms of the truncated
block itself.  Window sizes here stay small enough for dense linear algebra;
the ladder diagnostics therefore pair a dense small-window run against exact
per-block closed forms for the large rungs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .nilpotent import GradedNilpotentAlgebra
from .opcalc import OperatorCollection, clifford_generators, commutator_order_diagnostic
from .report import DiagnosticReport, canonical_json, fit_summary
from .tropical import BoundingMatrix

_DENSE_CAP = 8192  # largest dense crossed-product block we are willing to build


# ---------------------------------------------------------------------------
# exact integer matrix arithmetic


def _as_integer_matrix(m, what="action"):
    arr = np.asarray(m, dtype=object)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{what} must be a square matrix")
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        if isinstance(v, np.integer):
            v = int(v)
        if isinstance(v, int):
            out[idx] = v
            continue
        f = Fraction(v) if isinstance(v, Fraction) else Fraction(float(v))
        if f.denominator != 1:
            raise ValueError(f"{what} needs integer entries")
        out[idx] = int(f)
    return out


def _as_integer_vector(x, what="mode vector"):
    arr = np.asarray(x, dtype=object).reshape(-1)
    out = []
    for v in arr:
        if isinstance(v, np.integer):
            v = int(v)
        if isinstance(v, int):
            out.append(v)
            continue
        f = Fraction(v) if isinstance(v, Fraction) else Fraction(float(v))
        if f.denominator != 1:
            raise ValueError(f"{what} needs integer entries")
        out.append(int(f))
    return tuple(out)


def _object_eye(n):
    out = np.full((n, n), 0, dtype=object)
    for i in range(n):
        out[i, i] = 1
    return out


def _is_zero_matrix(m) -> bool:
    return all(v == 0 for v in m.ravel())


def _exact_determinant(m) -> Fraction:
    a = [[Fraction(v) for v in row] for row in m]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv = 1 / a[col][col]
        for r in range(col + 1, n):
            factor = a[r][col] * inv
            if factor:
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return det


def _exact_inverse(m):
    n = m.shape[0]
    det = _exact_determinant(m)
    if det not in (1, -1):
        raise ValueError("negative powers need a unimodular matrix (determinant +-1)")
    a = [[Fraction(v) for v in row] for row in m]
    inv = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[pivot] = a[pivot], a[col]
        inv[col], inv[pivot] = inv[pivot], inv[col]
        scale = 1 / a[col][col]
        a[col] = [x * scale for x in a[col]]
        inv[col] = [x * scale for x in inv[col]]
        for r in range(n):
            if r != col and a[r][col]:
                factor = a[r][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
                inv[r] = [x - factor * y for x, y in zip(inv[r], inv[col])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = int(inv[i][j])  # exact: determinant is a unit
    return out


def action_power(action, n: int):
    """Exact integer power A^n; negative n requires determinant +-1."""
    a = _as_integer_matrix(action)
    if n < 0:
        a, n = _exact_inverse(a), -n
    result = _object_eye(a.shape[0])
    base = a
    while n:
        if n & 1:
            result = result.dot(base)
        base = base.dot(base)
        n >>= 1
    return result


def nilpotency_step(action):
    """Minimal s with (A - 1)^(s+1) = 0 in exact integers, else None."""
    a = _as_integer_matrix(action)
    n = a - _object_eye(a.shape[0])
    power = n
    for s in range(a.shape[0]):
        if _is_zero_matrix(power):
            return s
        power = power.dot(n)
    return None  # a nonzero d-th power of a d x d matrix is never nilpotent


# ---------------------------------------------------------------------------
# torus truncations


class TorusTruncation:
    """Hard Fourier window [-K, K]^d tensored with a Clifford spinor factor.

    The spinor generators carry the metric: {v_i, v_j} = 2 * gram_ij, so the
    closed-form commutator norm of a single mode x is sqrt(x' gram x) times
    the Dirac scale.  Even d keeps the chirality grading; odd d has none.
    """

    def __init__(self, dim, cutoff, theta=None, gram=None, dirac_scale=1.0):
        dim, cutoff = int(dim), int(cutoff)
        if dim < 1:
            raise ValueError("dimension must be at least 1")
        if cutoff < 1:
            raise ValueError("cutoff must be at least 1")
        theta = np.zeros((dim, dim)) if theta is None else np.asarray(theta, dtype=float)
        if theta.shape != (dim, dim):
            raise ValueError("theta must be d x d")
        if np.max(np.abs(theta + theta.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(theta))):
            raise ValueError("theta must be antisymmetric")
        gram = np.eye(dim) if gram is None else np.asarray(gram, dtype=float)
        if gram.shape != (dim, dim) or np.max(np.abs(gram - gram.T)) > 1e-12:
            raise ValueError("gram must be a symmetric positive definite matrix")
        try:
            chol = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError:
            raise ValueError("gram must be a symmetric positive definite matrix") from None
        cg = clifford_generators(dim)
        self.dim = dim
        self.cutoff = cutoff
        self.theta = theta
        self.gram = gram
        self.dirac_scale = float(dirac_scale)
        self.generators = tuple(
            sum(chol[i, k] * cg.gammas[k] for k in range(dim)) for i in range(dim)
        )
        self.grading = cg.grading
        self.spinor_dim = cg.dim
        self.modes = np.array(list(product(range(-cutoff, cutoff + 1), repeat=dim)), dtype=int)
        self._lookup = {tuple(int(v) for v in m): i for i, m in enumerate(self.modes)}

    def mode_index(self, y) -> int:
        key = tuple(int(v) for v in np.asarray(y).reshape(-1))
        if key not in self._lookup:
            raise ValueError(f"mode {key} lies outside the truncation window")
        return self._lookup[key]

    def vector_norm(self, x) -> float:
        v = np.asarray(x, dtype=float)
        return float(np.sqrt(v @ self.gram @ v))

    def dirac(self) -> np.ndarray:
        d = np.zeros((len(self.modes) * self.spinor_dim,) * 2, dtype=complex)
        for i in range(self.dim):
            d += np.kron(np.diag(self.modes[:, i].astype(float)), self.generators[i])
        return self.dirac_scale * d


def torus_truncation(dim, cutoff, *, theta=None, gram=None, dirac_scale=1.0) -> TorusTruncation:
    return TorusTruncation(dim, cutoff, theta=theta, gram=gram, dirac_scale=dirac_scale)


def weyl_operator(trunc: TorusTruncation, x) -> np.ndarray:
    """Twisted shift by the integer mode x: (l(x) xi)(y) = phase * xi(y - x).

    The phase is exp(i pi <theta x, y - x>); with theta = 0 this is plain
    multiplication by the Fourier mode x.  Shifts leaving the window drop.
    """
    x = np.array(_as_integer_vector(x, "mode vector"), dtype=int)
    if x.shape[0] != trunc.dim:
        raise ValueError("mode vector dimension mismatch")
    s = trunc.spinor_dim
    out = np.zeros((len(trunc.modes) * s,) * 2, dtype=complex)
    tx = trunc.theta @ x
    eye = np.eye(s)
    for dst, y in enumerate(trunc.modes):
        src_key = tuple(int(v) for v in y - x)
        src = trunc._lookup.get(src_key)
        if src is None:
            continue
        phase = np.exp(1j * np.pi * float(tx @ (y - x)))
        out[dst * s:(dst + 1) * s, src * s:(src + 1) * s] = phase * eye
    return out


def nctorus_commutator_norm(trunc: TorusTruncation, x, action, n: int) -> dict:
    """||[D, l(A^n x)]|| two ways: dense on the truncation and in closed form.

    The closed form is scale * ||V A^n x||.  Both agree exactly whenever the
    shifted mode still fits (every component at most twice the cutoff); once
    it overflows the truncated operator is empty and only the closed form is
    meaningful, so the overflow is flagged rather than fatal.
    """
    z = action_power(action, n).dot(np.array(_as_integer_vector(x), dtype=object))
    z = tuple(int(v) for v in z)
    closed = trunc.dirac_scale * trunc.vector_norm(z)
    overflow = any(abs(v) > 2 * trunc.cutoff for v in z)
    w = weyl_operator(trunc, z)
    d = trunc.dirac()
    comm = d @ w - w @ d
    return {
        "matrix_norm": float(np.linalg.norm(comm, 2)),
        "closed_form": closed,
        "overflow": overflow,
        "mode": z,
    }


# ---------------------------------------------------------------------------
# classical torus multiplication operators


_SHEAR = ((1, 1), (0, 1))


def _pullback_modes(coeffs, action, n):
    """Fourier support of a after n pullbacks: m -> (A')^{-n} m exactly."""
    b = action_power(np.asarray(action, dtype=object).T, -n)
    out = {}
    for mode, c in coeffs.items():
        m = b.dot(np.array(_as_integer_vector(mode), dtype=object))
        out[tuple(int(v) for v in m)] = out.get(tuple(int(v) for v in m), 0.0) + complex(c)
    return out


def classical_torus_commutator(trunc: TorusTruncation, coeffs, n: int, action=None) -> float:
    """||[D, a o phi^{-n}]|| on the truncation for a trig polynomial a.

    ``coeffs`` maps integer modes to coefficients.  The phase matrix must
    vanish (commutative torus); the pulled-back support must fit the window.
    """
    if np.max(np.abs(trunc.theta), initial=0.0) != 0.0:
        raise ValueError("classical route needs theta = 0")
    shifted = _pullback_modes(coeffs, _SHEAR if action is None else action, n)
    for mode in shifted:
        if any(abs(v) > 2 * trunc.cutoff for v in mode):
            raise ValueError(f"cutoff {trunc.cutoff} too small for pulled-back mode {mode}")
    op = np.zeros((len(trunc.modes) * trunc.spinor_dim,) * 2, dtype=complex)
    for mode, c in shifted.items():
        op += c * weyl_operator(trunc, mode)
    d = trunc.dirac()
    return float(np.linalg.norm(d @ op - op @ d, 2))


def _trig_sups(coeffs, grid):
    """(sup |d_x a|, sup |grad a|) for a trig polynomial on the 2-torus."""
    xs = np.arange(grid) / grid
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    partials = []
    for axis in range(2):
        vals = np.zeros_like(gx, dtype=complex)
        for mode, c in coeffs.items():
            vals += complex(c) * 2j * np.pi * mode[axis] * np.exp(
                2j * np.pi * (mode[0] * gx + mode[1] * gy)
            )
        partials.append(np.abs(vals))
    grad = np.sqrt(partials[0] ** 2 + partials[1] ** 2)
    return float(partials[0].max()), float(grad.max())


def classical_bound_report(coeffs, n_values, cutoff, *, action=None,
                           dirac_scale=2.0 * np.pi, grid=512) -> DiagnosticReport:
    """Two-sided growth bound |n| sup|d_x a| +- C sup|grad a| for the shear.

    The constant C is fitted on every other n and verified on the rest; no
    sharpness is claimed for it, only stability across the tested range.
    """
    if any(len(mode) != 2 for mode in coeffs):
        raise ValueError("trig polynomial must live on the 2-torus")
    n_values = [int(n) for n in n_values]
    trunc = torus_truncation(2, cutoff, dirac_scale=dirac_scale)
    norms = [classical_torus_commutator(trunc, coeffs, n, action=action) for n in n_values]
    partial_sup, grad_sup = _trig_sups(coeffs, grid)
    fit_ns, check_ns = n_values[::2], n_values[1::2]
    if grad_sup < 1e-14:
        constant = 0.0
    else:
        constant = max(
            abs(norms[n_values.index(n)] - abs(n) * partial_sup) / grad_sup for n in fit_ns
        )
    rep = DiagnosticReport(
        title="classical shear commutator bounds",
        anchor="|n| sup|d_x a| - C sup|grad a| <= ||[D, a o phi^-n]|| <= |n| sup|d_x a| + C sup|grad a|",
    )
    slack = 1e-9 * (1.0 + partial_sup + grad_sup)
    lower = [norms[n_values.index(n)] - (abs(n) * partial_sup - constant * grad_sup) for n in check_ns]
    upper = [(abs(n) * partial_sup + constant * grad_sup) - norms[n_values.index(n)] for n in check_ns]
    rep.add_check(
        "lower-bound",
        all(m >= -slack for m in lower),
        value=min(lower, default=0.0),
        detail="worst margin over held-out n",
    )
    rep.add_check(
        "upper-bound",
        all(m >= -slack for m in upper),
        value=min(upper, default=0.0),
        detail="worst margin over held-out n",
    )
    rep.data.update(
        n_values=n_values,
        norms=norms,
        partial_sup=partial_sup,
        gradient_sup=grad_sup,
        constant=constant,
        fitted_on=fit_ns,
        verified_on=check_ns,
    )
    return rep


# ---------------------------------------------------------------------------
# crossed products with a Z-action


@dataclass(frozen=True, eq=False)
class CrossedTruncation:
    """Symmetric group window Z cap [-W, W] over a torus truncation.

    The weight direction is the number operator on the window; the bounding
    matrix has the unipotency step of the action in its lower-left corner.
    """

    base: TorusTruncation
    window: int
    action: np.ndarray
    step: int
    eps: BoundingMatrix


def crossed_truncation(base: TorusTruncation, window: int, action) -> CrossedTruncation:
    window = int(window)
    if window < 1:
        raise ValueError("window must be at least 1")
    a = _as_integer_matrix(action)
    if a.shape[0] != base.dim:
        raise ValueError("action dimension must match the base truncation")
    if _exact_determinant(a) != 1:
        raise ValueError("action determinant must be 1")
    step = nilpotency_step(a)
    if step is None:
        raise ValueError("action must be unipotent")
    eps = BoundingMatrix(((0, 0), (step, 0)), labels=("weight", "dirac"))
    return CrossedTruncation(base=base, window=window, action=a, step=step, eps=eps)


def crossed_collection(ct: CrossedTruncation) -> OperatorCollection:
    """(number operator, Dirac) as a strictly anticommuting pair.

    With a graded base the weight rides the chirality; without one the pair
    is doubled through two anticommuting Pauli directions.  Both routes make
    the anticommutator vanish entry by entry, not just up to tolerance.
    """
    base = ct.base
    n_diag = np.diag(np.arange(-ct.window, ct.window + 1).astype(float))
    win = np.eye(2 * ct.window + 1)
    d = base.dirac()
    if base.grading is not None:
        chirality = np.kron(np.eye(len(base.modes)), base.grading)
        ops = [np.kron(n_diag, chirality), np.kron(win, d)]
    else:
        sigma_x = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        sigma_y = np.array([[0.0, -1j], [1j, 0.0]])
        block = np.eye(len(base.modes) * base.spinor_dim)
        ops = [
            np.kron(n_diag, np.kron(block, sigma_x)),
            np.kron(win, np.kron(d, sigma_y)),
        ]
    if ops[0].shape[0] > _DENSE_CAP:
        raise ValueError(
            f"crossed collection dimension {ops[0].shape[0]} exceeds the dense cap {_DENSE_CAP}"
        )
    return OperatorCollection(ops, eps=ct.eps)


def crossed_element(ct: CrossedTruncation, mode, coeff=1.0) -> np.ndarray:
    """Covariant representation of one Fourier mode: block g acts by A^{-g}."""
    base = ct.base
    b = len(base.modes) * base.spinor_dim
    doubled = base.grading is None
    width = b * (2 if doubled else 1)
    slots = 2 * ct.window + 1
    out = np.zeros((slots * width,) * 2, dtype=complex)
    x = np.array(_as_integer_vector(mode), dtype=object)
    for slot, g in enumerate(range(-ct.window, ct.window + 1)):
        orbit = action_power(ct.action, -g).dot(x)
        block = coeff * weyl_operator(base, tuple(int(v) for v in orbit))
        if doubled:
            block = np.kron(block, np.eye(2))
        out[slot * width:(slot + 1) * width, slot * width:(slot + 1) * width] = block
    return out


def _orbit_reach(action, mode, window):
    reach = 0
    x = np.array(_as_integer_vector(mode), dtype=object)
    for g in range(-window, window + 1):
        orbit = action_power(action, -g).dot(x)
        reach = max(reach, max(abs(int(v)) for v in orbit))
    return reach


def crossed_order_diagnostic(action, mode, sizes, *, theta=None, gram=None,
                             dirac_scale=1.0, dense_sizes=(3, 4),
                             slope_tol=0.05, divergence_tol=0.15) -> DiagnosticReport:
    """Window-ladder growth of ||[D, a_g]|| with and without weight damping.

    Per window rung the supremum over |g| <= W of the per-block commutator
    norm, damped by (1 + |g|^s), is an exact closed form: the crossed
    commutator is block diagonal in g and each block is a single twisted
    shift.  Small rungs are replayed densely through the operator-collection
    diagnostic and must agree to 1e-10; large rungs use the closed form only.
    """
    sizes = sorted(int(s) for s in sizes)
    if len(sizes) < 2:
        raise ValueError("window ladder needs at least two rungs")
    a = _as_integer_matrix(action)
    step = nilpotency_step(a)
    if step is None:
        raise ValueError("action must be unipotent")
    dim = a.shape[0]
    gram_arr = np.eye(dim) if gram is None else np.asarray(gram, dtype=float)
    x = np.array(_as_integer_vector(mode), dtype=object)

    def block_norm(g):
        orbit = np.array([int(v) for v in action_power(a, -g).dot(x)], dtype=float)
        return dirac_scale * float(np.sqrt(orbit @ gram_arr @ orbit))

    cache = {}
    raw_sups, norm_sups = [], []
    for w in sizes:
        for g in range(-w, w + 1):
            if g not in cache:
                cache[g] = block_norm(g)
        raw_sups.append(max(cache[g] for g in range(-w, w + 1)))
        norm_sups.append(
            max(cache[g] / (1.0 + abs(g) ** step if step else 1.0) for g in range(-w, w + 1))
        )

    rep = DiagnosticReport(
        title="crossed-product commutator ladder",
        anchor="||[D, a_g]|| <= C (1 + |g|^s)",
    )
    rep.fits["normalized"] = fit_summary(sizes, norm_sups)
    rep.fits["raw"] = fit_summary(sizes, raw_sups)
    slope = rep.fits["normalized"]["slope"]
    raw_slope = rep.fits["raw"]["slope"]
    rep.add_check("bounded", slope is None or slope <= slope_tol,
                  value=slope, threshold=slope_tol)
    rep.add_check(
        "divergence-order",
        raw_slope is not None and abs(raw_slope - step) <= divergence_tol,
        value=raw_slope,
        threshold=float(step),
        detail=f"undamped slope should sit near the unipotency step {step}",
    )
    rep.data.update(
        sizes=sizes,
        raw_sups=raw_sups,
        normalized_sups=norm_sups,
        step=step,
        action=[[int(v) for v in row] for row in a],
        mode=[int(v) for v in x],
    )

    dense_sizes = sorted(int(s) for s in dense_sizes)
    if dense_sizes:
        if len(dense_sizes) < 2:
            raise ValueError("dense ladder needs at least two rungs")

        def builder(w):
            reach = _orbit_reach(a, mode, w)
            base = torus_truncation(
                dim, max(1, math.ceil(reach / 2)),
                theta=theta, gram=gram, dirac_scale=dirac_scale,
            )
            ct = crossed_truncation(base, w, a)
            return crossed_collection(ct), crossed_element(ct, mode)

        sub = commutator_order_diagnostic(
            builder, 1, (step, 0), dense_sizes,
            slope_tol=1.0, reduction=max(float(step), 0.25),
        )
        closed_damped = [
            max(cache.get(g, block_norm(g)) / (1.0 + abs(g) ** step if step else 1.0)
                for g in range(-w, w + 1))
            for w in dense_sizes
        ]
        closed_raw = [
            max(cache.get(g, block_norm(g)) for g in range(-w, w + 1)) for w in dense_sizes
        ]
        gap = max(
            max(abs(m - c) / (1.0 + c) for m, c in zip(sub.data["norms"], closed_damped)),
            max(abs(m - c) / (1.0 + c) for m, c in zip(sub.data["reduced_norms"], closed_raw)),
        )
        rep.add_check("dense-agreement", gap <= 1e-10, value=gap, threshold=1e-10,
                      detail="dense operator ladder against per-block closed forms")
        rep.data["dense"] = {
            "sizes": dense_sizes,
            "norms": sub.data["norms"],
            "reduced_norms": sub.data["reduced_norms"],
            "closed_damped": closed_damped,
            "closed_raw": closed_raw,
        }
    return rep


# ---------------------------------------------------------------------------
# Moebius transformations of the round sphere


def mobius_classify(g) -> str:
    """Conjugacy class of g in SL(2, C) acting on the Riemann sphere."""
    m = np.asarray(g, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError("need a 2 x 2 matrix")
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(det - 1.0) > 1e-9:
        raise ValueError("determinant must be 1")
    if min(np.max(np.abs(m - np.eye(2))), np.max(np.abs(m + np.eye(2)))) <= 1e-9:
        return "identity"
    tr = m[0, 0] + m[1, 1]
    if abs(tr.imag) <= 1e-9:
        t = abs(tr.real)
        if abs(t - 2.0) <= 1e-9:
            return "parabolic"
        if t < 2.0:
            return "elliptic"
    return "loxodromic"


def mobius_jacobian_sup(g, n: int) -> float:
    """sup over the sphere of the round-metric jacobian of the n-th power.

    Closed forms per class (for the standard normal forms): elliptic and
    identity pin at 1; parabolic gives (n^2 + |n| sqrt(n^2+4) + 2)/2;
    loxodromic with multiplier lambda gives max(|lambda|^{2n}, |lambda|^{-2n}).
    """
    kind = mobius_classify(g)
    n = int(n)
    if kind in ("identity", "elliptic"):
        return 1.0
    if kind == "parabolic":
        m = abs(n)
        return (m * m + m * math.sqrt(m * m + 4.0) + 2.0) / 2.0
    lam = max(abs(v) for v in np.linalg.eigvals(np.asarray(g, dtype=complex)))
    lam = max(lam, 1.0 / lam)
    return float(lam ** (2 * abs(n)))


def _complex_power(g, n):
    m = np.asarray(g, dtype=complex)
    if n < 0:
        m = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])  # det 1 inverse
        n = -n
    return np.linalg.matrix_power(m, n)


def mobius_brute_force_sup(g, n: int, grid: int = 400, refine: int = 2) -> float:
    """Grid sup of (1+|z|^2) / (|cz+d|^2 + |az+b|^2) in the stereographic chart.

    The chart is sampled uniformly in the sphere angle so both poles get equal
    coverage; two local refinement rounds around the best cell bring the grid
    within small multiples of float precision of the true supremum.
    """
    m = _complex_power(g, n)
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]

    def values(phi, theta):
        z = np.tan(phi / 2.0)[:, None] * np.exp(1j * theta)[None, :]
        return (1.0 + np.abs(z) ** 2) / (np.abs(c * z + d) ** 2 + np.abs(a * z + b) ** 2)

    lo_p, hi_p = 0.0, np.pi * (1.0 - 1e-12)
    lo_t, hi_t = 0.0, 2.0 * np.pi
    best = 1.0 / (abs(a) ** 2 + abs(c) ** 2)  # the point at infinity
    for _ in range(refine + 1):
        phi = np.linspace(lo_p, hi_p, grid, endpoint=False)
        theta = np.linspace(lo_t, hi_t, grid, endpoint=False)
        vals = values(phi, theta)
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        best = max(best, float(vals[i, j]))
        dp, dt = phi[1] - phi[0], theta[1] - theta[0]
        lo_p, hi_p = max(phi[i] - 2 * dp, 0.0), min(phi[i] + 2 * dp, np.pi * (1.0 - 1e-12))
        lo_t, hi_t = theta[j] - 2 * dt, theta[j] + 2 * dt
    return best


# ---------------------------------------------------------------------------
# adjoint growth along one-parameter flows


def adjoint_growth(algebra, x, t_grid=None) -> DiagnosticReport:
    """Polynomial growth degree of ||Ad_{exp tX}|| for nilpotent ad_X.

    Accepts a graded nilpotent algebra or a raw antisymmetric structure
    tensor T[p,q,r] (so semisimple algebras can contribute their nilpotent
    directions).  Ad_{exp tX} is the finite sum of t^k ad_X^k / k!; the
    degree is the top nonvanishing power, and the log-log slope of the norm
    must match it and stay put when the t-window doubles.
    """
    if isinstance(algebra, GradedNilpotentAlgebra):
        tensor = algebra.structure_tensor()
    else:
        tensor = np.asarray(algebra, dtype=float)
        if tensor.ndim != 3 or len(set(tensor.shape)) != 1:
            raise ValueError("structure tensor must be cubic")
        if np.max(np.abs(tensor + np.swapaxes(tensor, 0, 1))) > 1e-12:
            raise ValueError("structure tensor must be antisymmetric in its first two slots")
    xv = np.asarray(x, dtype=float)
    if xv.shape != (tensor.shape[0],):
        raise ValueError("element has the wrong dimension")
    ad = np.einsum("pqr,p->rq", tensor, xv)
    dim = ad.shape[0]
    scale = max(1.0, float(np.max(np.abs(ad))))
    powers = [np.eye(dim)]
    degree = None
    p = ad.copy()
    for k in range(1, dim + 1):
        if np.max(np.abs(p)) <= 1e-12 * scale**k:
            degree = k - 1
            break
        powers.append(p)
        p = p @ ad
    if degree is None:
        raise ValueError("ad_X is not nilpotent")

    if t_grid is None:
        t_grid = np.geomspace(1.0, 256.0, 9)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 4:
        raise ValueError("t grid needs at least 4 sample points")
    if np.any(t_grid <= 0.0):
        raise ValueError("t grid must be positive")

    def norm_ladder(ts):
        out = []
        for t in ts:
            s = sum((t**k / math.factorial(k)) * powers[k] for k in range(degree + 1))
            out.append(float(np.linalg.norm(s, 2)))
        return out

    norms = norm_ladder(t_grid)
    fit = fit_summary(t_grid, norms)
    doubled = fit_summary(2.0 * t_grid, norm_ladder(2.0 * t_grid))
    rep = DiagnosticReport(
        title="adjoint growth along a one-parameter flow",
        anchor="Ad_{exp tX} = sum_k t^k ad_X^k / k!",
    )
    rep.fits["growth"] = fit
    slope = fit["slope"]
    rep.add_check(
        "nilpotent-degree",
        slope is not None and abs(slope - degree) <= 0.15,
        value=slope,
        threshold=float(degree),
        detail="fitted slope against the top nonvanishing ad power",
    )
    drift = abs((slope or 0.0) - (doubled["slope"] or 0.0))
    rep.add_check("window-stability", drift < 0.1, value=drift, threshold=0.1)
    rep.data.update(
        degree=degree,
        t_grid=[float(t) for t in t_grid],
        norms=norms,
        doubled_slope=doubled["slope"],
    )
    return rep


# ---------------------------------------------------------------------------
# experiment configuration plumbing


def dynamics_config_json(*, action, mode=None, ladder=None, theta=None,
                         gram=None, dirac_scale=1.0, cutoff=None) -> str:
    """Canonical JSON for a crossed-product experiment configuration."""
    a = _as_integer_matrix(action)
    cfg = {
        "action": [[int(v) for v in row] for row in a],
        "mode": None if mode is None else [int(v) for v in _as_integer_vector(mode)],
        "ladder": None if ladder is None else [int(v) for v in ladder],
        "theta": None if theta is None else [[float(v) for v in row] for row in np.asarray(theta)],
        "gram": None if gram is None else [[float(v) for v in row] for row in np.asarray(gram)],
        "dirac_scale": float(dirac_scale),
        "cutoff": None if cutoff is None else int(cutoff),
    }
    return canonical_json(cfg)


def dynamics_config_from_json(text: str) -> dict:
    raw = json.loads(text)
    if not isinstance(raw, dict) or "action" not in raw or raw["action"] is None:
        raise ValueError("config needs an action matrix")
    out = {
        "action": tuple(tuple(int(v) for v in row) for row in raw["action"]),
        "mode": None if raw.get("mode") is None else tuple(int(v) for v in raw["mode"]),
        "ladder": None if raw.get("ladder") is None else tuple(int(v) for v in raw["ladder"]),
        "theta": None if raw.get("theta") is None else np.asarray(raw["theta"], dtype=float),
        "gram": None if raw.get("gram") is None else np.asarray(raw["gram"], dtype=float),
        "dirac_scale": float(raw.get("dirac_scale", 1.0)),
        "cutoff": None if raw.get("cutoff") is None else int(raw["cutoff"]),
    }
    return out
