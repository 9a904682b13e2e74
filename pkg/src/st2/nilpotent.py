"""Graded nilpotent Lie algebras and their lattice weight operators.

The objects here feed the operator calculus with its main nonabelian
examples.  A graded nilpotent algebra carries layers V_1, ..., V_s; group
elements are coordinate vectors (exponential chart by default, a triangular
second-kind chart for lattice work); multiplication is the
Baker-Campbell-Hausdorff series, exact over the rationals up to step 6.
Each layer contributes a weight operator l_j(g) = sum_k x_{j,k} gamma_{j,k}
built on anticommuting Clifford generators, so that l_j(g)^2 = |x_j|^2 and
weights of distinct layers anticommute on the nose.

Left translation moves the weights by a controlled amount: the defect
l_i(gh) - l_i(h), normalized by 1 + sum_j |l_j(h)|^{eps_ij}, stays bounded
in h exactly when eps dominates the bracket bookkeeping.  The generic
matrix eps_ij = max(i - j, 0) always works, and ``generic_certificate``
produces a closed-form ceiling f(g) for the normalized defect whose every
inequality is checkable sample by sample.  Stratified (Carnot) algebras
admit the smaller matrix eps_ij = floor((i-1)/j) and a dilation action
delta_t scaling layer j by t^j; ``dilation_scaling_check`` verifies the
induced unitary conjugation sends l_j to t^{-j} l_j.

Restriction to integer lattice points in a box |x_{j,k}| < R^j gives finite
strictly anticommuting truncations whose assembled spectrum is computable
point by point, plus convolution operators with explicit boundary masking.

Sup estimation over lattice balls enumerates small boxes outright and
otherwise mixes corner/extreme probes with seeded uniform draws; everything
is vectorized over the probe axis, so sups parallelize trivially.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np

from .opcalc import OperatorCollection, clifford_generators
from .report import DiagnosticReport, canonical_json, fit_summary, loglog_fit
from .tropical import BoundingMatrix

__all__ = [
    "GradedNilpotentAlgebra",
    "WeightFamily",
    "ConvolutionElement",
    "LatticeTruncation",
    "abelian_algebra",
    "algebra_from_json",
    "algebra_to_json",
    "bch_multiply",
    "bch_terms",
    "carnot_bounding_matrix",
    "certificate_chain",
    "counting_exponent",
    "dilate",
    "dilation_scaling_check",
    "exponential_from_second_kind",
    "filiform_algebra",
    "generic_bounding_matrix",
    "generic_certificate",
    "group_multiply",
    "heisenberg_algebra",
    "lattice_truncation",
    "second_kind_from_exponential",
    "translation_defect",
    "verify_translation_bound",
    "weight_family",
]

_BCH_MAX_ORDER = 6


# ---------------------------------------------------------------------------
# algebra


def _is_exact_scalar(v) -> bool:
    return isinstance(v, (int, np.integer, Fraction)) and not isinstance(v, bool)


def _coerce_exact_vector(x, dim):
    """Return (list of Fraction, True) when x is exact, else (float array, False)."""
    vals = list(x)
    if len(vals) != dim:
        raise ValueError(f"coordinate vector has length {len(vals)}, expected {dim}")
    if all(_is_exact_scalar(v) for v in vals):
        return [Fraction(v) for v in vals], True
    return np.asarray([float(v) for v in vals], dtype=float), False


class GradedNilpotentAlgebra:
    """Nilpotent Lie algebra with a fixed layer grading of its basis.

    ``layer_dims`` lists dim V_j for j = 1..step; the flat basis enumerates
    the layers in order, so basis index p sits in layer ``self.layer(p)``.
    ``brackets`` maps a flat index pair (p, q) to {r: coefficient} giving
    [e_p, e_q] = sum_r c_r e_r.  Only one orientation per pair is needed;
    both may be given if they agree up to sign.  Construction validates
    antisymmetry, compatibility with the layer filtration
    ([V_a, V_b] inside layers >= a+b), and the Jacobi identity, all in exact
    arithmetic.  ``carnot`` records whether the grading is strict
    ([V_a, V_b] inside V_{a+b}) and generated by V_1.

    ``faithful_rep`` optionally carries nilpotent Fraction matrices
    representing the basis; the shipped constructors use it as an
    independent route to group multiplication.
    """

    def __init__(self, layer_dims, brackets, faithful_rep=None):
        layer_dims = tuple(int(d) for d in layer_dims)
        if not layer_dims or any(d < 1 for d in layer_dims):
            raise ValueError("layer_dims must be a nonempty tuple of positive ints")
        self.layer_dims = layer_dims
        self.step = len(layer_dims)
        self.dim = sum(layer_dims)
        offsets = [0]
        for d in layer_dims:
            offsets.append(offsets[-1] + d)
        self._offsets = tuple(offsets)
        layers = []
        labels = []
        for j, d in enumerate(layer_dims, start=1):
            for k in range(1, d + 1):
                layers.append(j)
                labels.append((j, k))
        self._layers = tuple(layers)
        self.labels = tuple(labels)

        self._table = self._canonicalize(brackets)
        self._check_filtration()
        self._check_jacobi()
        self._tensor = self._build_tensor()
        self.carnot = self._is_stratified()
        self.faithful_rep = tuple(faithful_rep) if faithful_rep is not None else None

    # -- construction helpers

    def _canonicalize(self, brackets):
        table = {}
        for (p, q), coeffs in brackets.items():
            p, q = int(p), int(q)
            if not (0 <= p < self.dim and 0 <= q < self.dim):
                raise ValueError(f"bracket pair ({p}, {q}) out of range")
            items = {int(r): Fraction(c) for r, c in dict(coeffs).items() if Fraction(c) != 0}
            if not items:
                continue
            if p == q:
                raise ValueError(f"antisymmetry forces [e_{p}, e_{p}] = 0")
            if p < q:
                key, signed = (p, q), items
            else:
                key, signed = (q, p), {r: -c for r, c in items.items()}
            if key in table:
                if table[key] != signed:
                    raise ValueError(
                        f"antisymmetry violated: pair {key} given twice with"
                        " inconsistent coefficients"
                    )
            else:
                table[key] = signed
        return table

    def _check_filtration(self):
        for (p, q), coeffs in self._table.items():
            lay = self._layers[p] + self._layers[q]
            for r in coeffs:
                if not 0 <= r < self.dim:
                    raise ValueError(f"bracket target e_{r} out of range")
                if self._layers[r] < lay:
                    raise ValueError(
                        f"filtration violated: [e_{p}, e_{q}] hits layer"
                        f" {self._layers[r]} below {lay}"
                    )

    def _basis_bracket(self, p, q):
        if p == q:
            return {}
        if p < q:
            return self._table.get((p, q), {})
        return {r: -c for r, c in self._table.get((q, p), {}).items()}

    def _check_jacobi(self):
        for p in range(self.dim):
            for q in range(p + 1, self.dim):
                for r in range(q + 1, self.dim):
                    acc = {}
                    for a, b, c in ((p, q, r), (q, r, p), (r, p, q)):
                        inner = self._basis_bracket(b, c)
                        for m, cm in inner.items():
                            outer = self._basis_bracket(a, m)
                            for t, ct in outer.items():
                                acc[t] = acc.get(t, Fraction(0)) + cm * ct
                    if any(v != 0 for v in acc.values()):
                        raise ValueError(
                            f"Jacobi identity fails on basis triple ({p}, {q}, {r})"
                        )

    def _build_tensor(self):
        t = np.zeros((self.dim, self.dim, self.dim))
        for (p, q), coeffs in self._table.items():
            for r, c in coeffs.items():
                t[p, q, r] += float(c)
                t[q, p, r] -= float(c)
        return t

    def _is_stratified(self):
        # homogeneous: every bracket lands exactly in the sum of the layers
        for (p, q), coeffs in self._table.items():
            lay = self._layers[p] + self._layers[q]
            if any(self._layers[r] != lay for r in coeffs):
                return False
        # generated in degree one: [V_1, V_j] spans V_{j+1}
        for j in range(1, self.step):
            target = self.layer_slice(j + 1)
            want = self.layer_dims[j]
            rows = []
            for p in range(*self.layer_slice(1).indices(self.dim)):
                for q in range(*self.layer_slice(j).indices(self.dim)):
                    coeffs = self._basis_bracket(p, q)
                    rows.append([float(coeffs.get(r, 0)) for r in range(target.start, target.stop)])
            if not rows or np.linalg.matrix_rank(np.array(rows)) < want:
                return False
        return True

    # -- public structure

    def layer(self, p: int) -> int:
        return self._layers[p]

    def layer_slice(self, j: int) -> slice:
        if not 1 <= j <= self.step:
            raise ValueError(f"layer index {j} out of range 1..{self.step}")
        return slice(self._offsets[j - 1], self._offsets[j])

    @property
    def homogeneous_dimension(self) -> int:
        return sum(j * d for j, d in enumerate(self.layer_dims, start=1))

    def bracket(self, x, y):
        """[x, y] for coordinate vectors; exact when both inputs are exact."""
        xe, x_exact = _coerce_exact_vector(x, self.dim)
        ye, y_exact = _coerce_exact_vector(y, self.dim)
        if x_exact and y_exact:
            out = [Fraction(0)] * self.dim
            for (p, q), coeffs in self._table.items():
                w = xe[p] * ye[q] - xe[q] * ye[p]
                if w:
                    for r, c in coeffs.items():
                        out[r] += c * w
            return out
        xf = np.asarray([float(v) for v in xe], dtype=float)
        yf = np.asarray([float(v) for v in ye], dtype=float)
        return np.einsum("pqr,p,q->r", self._tensor, xf, yf)

    def lower_central_series_dims(self) -> tuple:
        """Dimensions of the lower central series g_1 >= g_2 >= ... (nonzero
        terms only), computed by rank over the rationals cast to floats."""
        dims = [self.dim]
        basis = [np.eye(self.dim)[k] for k in range(self.dim)]
        current = basis
        while True:
            spans = []
            for u in basis:
                for v in current:
                    w = np.einsum("pqr,p,q->r", self._tensor, u, v)
                    if np.any(w):
                        spans.append(w)
            if not spans:
                break
            mat = np.array(spans)
            rank = int(np.linalg.matrix_rank(mat))
            if rank == 0:
                break
            dims.append(rank)
            # orthonormal spanning set of the new term
            _, _, vt = np.linalg.svd(mat)
            current = [vt[i] for i in range(rank)]
        return tuple(dims)

    def structure_tensor(self) -> np.ndarray:
        return self._tensor.copy()


def heisenberg_algebra() -> GradedNilpotentAlgebra:
    """Step-2 algebra [e1, e2] = e3, layers (2, 1), with its 3x3 shift rep."""

    def e(i, j):
        m = np.full((3, 3), Fraction(0), dtype=object)
        m[i, j] = Fraction(1)
        return m

    return GradedNilpotentAlgebra(
        layer_dims=(2, 1),
        brackets={(0, 1): {2: 1}},
        faithful_rep=(e(0, 1), e(1, 2), e(0, 2)),
    )


def filiform_algebra(step: int) -> GradedNilpotentAlgebra:
    """Filiform algebra of the given step: [A, Y_k] = Y_{k+1}, layers
    (2, 1, ..., 1), with the (step+1)-square single-chain matrix rep."""
    s = int(step)
    if s < 2:
        raise ValueError("filiform step must be at least 2")
    dim = s + 1
    brackets = {(0, k): {k + 1: 1} for k in range(1, s)}

    def e(i, j):
        m = np.full((s + 1, s + 1), Fraction(0), dtype=object)
        m[i, j] = Fraction(1)
        return m

    a = np.full((s + 1, s + 1), Fraction(0), dtype=object)
    for i in range(s - 1):
        a[i, i + 1] = Fraction(1)
    rep = [a, e(s - 1, s)] + [e(s - k, s) for k in range(2, s + 1)]
    return GradedNilpotentAlgebra(
        layer_dims=(2,) + (1,) * (s - 1),
        brackets=brackets,
        faithful_rep=rep,
    )


def abelian_algebra(dim: int) -> GradedNilpotentAlgebra:
    return GradedNilpotentAlgebra(layer_dims=(int(dim),), brackets={})


# ---------------------------------------------------------------------------
# BCH arithmetic


@lru_cache(maxsize=None)
def _dynkin_words(max_order: int = _BCH_MAX_ORDER):
    """Word table for log(exp X exp Y): tuples over {0: X, 1: Y} mapped to
    rational coefficients of the right-nested bracket
    [w_1, [w_2, [..., [w_{m-1}, w_m]]]].

    Built from the alternating sum over block compositions
    (X^{p_1} Y^{q_1} ... X^{p_L} Y^{q_L}) with weight
    (-1)^(L-1) / (L * total * prod p_i! q_i!); words whose last two letters
    agree have vanishing bracket and are dropped, as are words whose merged
    coefficient cancels to zero.
    """
    words: dict = {}

    def extend(remaining, blocks):
        if blocks:
            letters = []
            for p, q in blocks:
                letters.extend([0] * p + [1] * q)
            total = len(letters)
            coeff = Fraction((-1) ** (len(blocks) - 1), len(blocks) * total)
            for p, q in blocks:
                coeff /= factorial(p) * factorial(q)
            w = tuple(letters)
            words[w] = words.get(w, Fraction(0)) + coeff
        for p in range(remaining + 1):
            for q in range(remaining - p + 1):
                if p + q == 0:
                    continue
                extend(remaining - p - q, blocks + ((p, q),))

    extend(max_order, ())
    table = {}
    for w, c in sorted(words.items(), key=lambda kv: (len(kv[0]), kv[0])):
        if c == 0:
            continue
        if len(w) >= 2 and w[-1] == w[-2]:
            continue
        table[w] = c
    return table


def _require_bch_step(algebra):
    if algebra.step > _BCH_MAX_ORDER:
        raise ValueError(
            f"step {algebra.step} exceeds the order-{_BCH_MAX_ORDER} product table"
        )


def _nested_bracket_exact(algebra, word, x, y):
    vecs = (x, y)
    v = vecs[word[-1]]
    for letter in word[-2::-1]:
        v = algebra.bracket(vecs[letter], v)
        if not any(v):
            return None
    return v


def bch_terms(x, y, algebra) -> dict:
    """Homogeneous pieces of log(exp X exp Y) by bracket order: {1: x + y,
    2: [x,y]/2, ...} up to the algebra step.  Exact for exact inputs."""
    _require_bch_step(algebra)
    dim = algebra.dim
    xe, x_exact = _coerce_exact_vector(x, dim)
    ye, y_exact = _coerce_exact_vector(y, dim)
    exact = x_exact and y_exact
    if not exact:
        xe = np.asarray([float(v) for v in xe], dtype=float)
        ye = np.asarray([float(v) for v in ye], dtype=float)

    def zero():
        return [Fraction(0)] * dim if exact else np.zeros(dim)

    def add_into(acc, coeff, vec):
        if exact:
            for r in range(dim):
                acc[r] += coeff * vec[r]
        else:
            acc += float(coeff) * np.asarray(vec, dtype=float)
        return acc

    terms = {}
    first = zero()
    for r in range(dim):
        if exact:
            first[r] = xe[r] + ye[r]
    if not exact:
        first = xe + ye
    terms[1] = first
    for n in range(2, algebra.step + 1):
        terms[n] = zero()
    for word, coeff in _dynkin_words().items():
        n = len(word)
        if n < 2 or n > algebra.step:
            continue
        v = _nested_bracket_exact(algebra, word, xe, ye)
        if v is None:
            continue
        terms[n] = add_into(terms[n], coeff, v)
    return terms


def bch_multiply(x, y, algebra):
    """Coordinates of log(exp X exp Y).  Returns Fractions (object array)
    for exact inputs, float64 otherwise; exact arithmetic throughout the
    series in the first case."""
    terms = bch_terms(x, y, algebra)
    total = terms[1]
    for n in range(2, algebra.step + 1):
        if isinstance(total, np.ndarray) and total.dtype == float:
            total = total + terms[n]
        else:
            total = [a + b for a, b in zip(total, terms[n])]
    if isinstance(total, np.ndarray) and total.dtype == float:
        return total
    return np.array(total, dtype=object)


# ---------------------------------------------------------------------------
# charts


def _basis_vector(dim, k, value):
    out = [Fraction(0)] * dim
    out[k] = Fraction(value)
    return out


def second_kind_from_exponential(x, algebra):
    """Coordinates in the triangular chart g = exp(c_n e_n) ... exp(c_1 e_1),
    obtained by peeling coordinates in flat order.  Peeling is exact: at each
    stage the remaining element is supported on higher flat indices because
    basis tails span ideals of the graded algebra."""
    xe, exact = _coerce_exact_vector(x, algebra.dim)
    if not exact:
        xe = [Fraction(float(v)) for v in xe]
    out = []
    rest = list(xe)
    for k in range(algebra.dim):
        c = rest[k]
        out.append(c)
        if c != 0:
            rest = list(bch_multiply(rest, _basis_vector(algebra.dim, k, -c), algebra))
    if exact:
        return np.array(out, dtype=object)
    return np.asarray([float(v) for v in out], dtype=float)


def exponential_from_second_kind(x, algebra):
    """Inverse chart map: assemble the descending product and take its log."""
    xe, exact = _coerce_exact_vector(x, algebra.dim)
    if not exact:
        xe = [Fraction(float(v)) for v in xe]
    z = [Fraction(0)] * algebra.dim
    for k in range(algebra.dim - 1, -1, -1):
        if xe[k] != 0:
            z = list(bch_multiply(z, _basis_vector(algebra.dim, k, xe[k]), algebra))
    if exact:
        return np.array(z, dtype=object)
    return np.asarray([float(v) for v in z], dtype=float)


def group_multiply(x, y, algebra, chart: str = "exponential"):
    """Group product of two coordinate vectors in the requested chart."""
    if chart == "exponential":
        return bch_multiply(x, y, algebra)
    if chart == "second-kind":
        a = exponential_from_second_kind(x, algebra)
        b = exponential_from_second_kind(y, algebra)
        return second_kind_from_exponential(bch_multiply(a, b, algebra), algebra)
    raise ValueError(f"unknown chart {chart!r}")


def _group_inverse(x, algebra, chart):
    if chart == "exponential":
        return np.array([-Fraction(v) for v in x], dtype=object)
    a = exponential_from_second_kind(x, algebra)
    return second_kind_from_exponential([-v for v in a], algebra)


def dilate(x, t, algebra):
    """Grading dilation: layer-j coordinates scale by t^j.  Exact for exact
    t; float passthrough otherwise."""
    xe, exact = _coerce_exact_vector(x, algebra.dim)
    if exact and _is_exact_scalar(t):
        tf = Fraction(t)
        return np.array(
            [xe[p] * tf ** algebra.layer(p) for p in range(algebra.dim)], dtype=object
        )
    xf = np.asarray([float(v) for v in xe], dtype=float)
    tf = float(t)
    scales = np.array([tf ** algebra.layer(p) for p in range(algebra.dim)])
    return xf * scales


# ---------------------------------------------------------------------------
# weights


@dataclass
class WeightFamily:
    """Layer weights l_j(g) = sum_k x_{j,k} gamma_{j,k} on a Clifford module
    of dimension 2^ceil(dim/2).  The generators are Hermitian involutions and
    anticommute pairwise, so l_i(x) l_j(y) + l_j(y) l_i(x) equals
    2 <x_i, y_j> delta_{ij}; a grading involution is kept only when the
    algebra dimension is even (the odd family uses up the last generator)."""

    algebra: GradedNilpotentAlgebra
    gammas: tuple
    grading: np.ndarray | None
    module_dim: int

    def _block(self, j, coords):
        sl = self.algebra.layer_slice(j)
        return [float(v) for v in list(coords)[sl.start : sl.stop]], sl

    def evaluate(self, j: int, coords) -> np.ndarray:
        block, sl = self._block(j, coords)
        out = np.zeros((self.module_dim, self.module_dim), dtype=complex)
        for c, g in zip(block, self.gammas[sl.start : sl.stop]):
            if c:
                out += c * g
        return out

    def layer_norm(self, j: int, coords) -> float:
        block, _ = self._block(j, coords)
        return float(np.linalg.norm(block))

    def layer_norms(self, coords) -> tuple:
        return tuple(self.layer_norm(j, coords) for j in range(1, self.algebra.step + 1))

    def assembled_symbol(self, coords, tau: float) -> np.ndarray:
        """sum_j sign(l_j) |l_j|^{tau/j}; since l_j(g)^2 = r_j^2 this is
        r_j^{tau/j - 1} l_j(g) layer by layer."""
        out = np.zeros((self.module_dim, self.module_dim), dtype=complex)
        for j in range(1, self.algebra.step + 1):
            r = self.layer_norm(j, coords)
            if r > 0:
                out += r ** (float(tau) / j - 1.0) * self.evaluate(j, coords)
        return out


def weight_family(algebra: GradedNilpotentAlgebra) -> WeightFamily:
    d = algebra.dim
    if d % 2 == 0:
        gens = clifford_generators(d)
        grading = gens.grading
    else:
        # oversized module keeps the layer count; no grading survives odd d
        gens = clifford_generators(d, qubits=(d + 1) // 2)
        grading = None
    return WeightFamily(
        algebra=algebra,
        gammas=tuple(gens.gammas),
        grading=grading,
        module_dim=gens.dim,
    )


# ---------------------------------------------------------------------------
# translation defects


def _eps_entries(eps):
    if not isinstance(eps, BoundingMatrix):
        eps = BoundingMatrix(eps)
    return eps.entries


def translation_defect(family: WeightFamily, g, h, eps, chart: str = "exponential"):
    """Per-layer (raw, normalized) defect of left translation by g at h.

    raw_i is the operator norm of l_i(gh) - l_i(h) (the Euclidean norm of the
    layer-i coordinate difference); the normalization divides by
    1 + sum_{j: eps_ij > 0} |l_j(h)|^{eps_ij}.
    """
    alg = family.algebra
    entries = _eps_entries(eps)
    if len(entries) != alg.step:
        raise ValueError("bounding matrix size must match the layer count")
    gh = group_multiply(g, h, alg, chart=chart)
    diff = [float(a) - float(b) for a, b in zip(gh, list(h))]
    rj = family.layer_norms(h)
    out = []
    for i in range(1, alg.step + 1):
        sl = alg.layer_slice(i)
        raw = float(np.linalg.norm(diff[sl.start : sl.stop]))
        denom = 1.0
        for j in range(1, alg.step + 1):
            e = float(entries[i - 1][j - 1])
            if e > 0:
                denom += rj[j - 1] ** e
        out.append((raw, raw / denom))
    return out


def generic_bounding_matrix(step: int) -> BoundingMatrix:
    """eps_ij = max(i - j, 0): the translation bound every graded algebra
    satisfies."""
    s = int(step)
    rows = [[Fraction(max(i - j, 0)) for j in range(1, s + 1)] for i in range(1, s + 1)]
    return BoundingMatrix(rows, labels=[f"l{j}" for j in range(1, s + 1)])


def carnot_bounding_matrix(step: int) -> BoundingMatrix:
    """eps_ij = floor((i-1)/j) for i > j: the sharper stratified bound."""
    s = int(step)
    rows = [
        [Fraction((i - 1) // j) if i > j else Fraction(0) for j in range(1, s + 1)]
        for i in range(1, s + 1)
    ]
    return BoundingMatrix(rows, labels=[f"l{j}" for j in range(1, s + 1)])


# ---------------------------------------------------------------------------
# the generic certificate


def _bracket_bound(algebra) -> float:
    """Frobenius ceiling B with ||[x, y]|| <= B ||x|| ||y||: the root of the
    summed squared Frobenius norms of the target slices of the structure
    tensor (Cauchy-Schwarz per output coordinate)."""
    t = algebra.structure_tensor()
    return float(np.sqrt(np.sum(t * t)))


def _truncate_layers(algebra, coords, max_layer):
    out = [float(v) for v in list(coords)]
    for p in range(algebra.dim):
        if algebra.layer(p) > max_layer:
            out[p] = 0.0
    return np.asarray(out)


def generic_certificate(family: WeightFamily, g, index: int | None = None) -> dict:
    """Closed-form ceiling f_index(g) for the normalized defect of layer
    ``index`` under the generic bounding matrix, uniform over h.

    The ceiling follows the defect decomposition through the product series:
    the layer-index piece of log((exp g)(exp h)) - h is l_index(g) plus
    order-n corrections z_n whose letters live in layers <= index - n + 1.
    Each word of length n with a letters from g and b = n - a from h is
    bounded by B^{n-1} ||g-part||^a ||h-part||^b, and the h-part power is
    absorbed into the normalization via
    ||h-part||^b <= m^b (1 + sum_j r_j^{index-j}) with m = index - n + 1.
    Every step is an inequality valid pointwise, so the certificate can be
    cross-checked sample by sample (see ``certificate_chain``).
    """
    alg = family.algebra
    _require_bch_step(alg)
    i = alg.step if index is None else int(index)
    if not 1 <= i <= alg.step:
        raise ValueError(f"index {i} out of range 1..{alg.step}")
    b = _bracket_bound(alg)
    gs = np.asarray([float(v) for v in list(g)])
    bound = float(np.linalg.norm(gs[alg.layer_slice(i)]))
    constants = {}
    words_by_len: dict = {}
    for w, c in _dynkin_words().items():
        words_by_len.setdefault(len(w), []).append((w, abs(c)))
    for n in range(2, i + 1):
        m = i - n + 1
        gtrunc = np.linalg.norm(_truncate_layers(alg, gs, m))
        z_n = 0.0
        coeff_sum = 0.0
        for w, c in words_by_len.get(n, []):
            a = sum(1 for letter in w if letter == 0)
            bb = n - a
            coeff_sum += float(c)
            z_n += float(c) * (gtrunc ** a) * (float(m) ** bb)
        constants[n] = b ** (n - 1) * coeff_sum
        bound += b ** (n - 1) * z_n
    return {"bound": bound, "constants": constants, "bracket_bound": b, "index": i}


def certificate_chain(family: WeightFamily, g, h, index: int | None = None) -> DiagnosticReport:
    """Evaluate every inequality in the generic-bound derivation at one
    (g, h) pair: triangle step, per-word bracket bound, layer absorption,
    and the final ceiling.  All four must hold pointwise."""
    alg = family.algebra
    i = alg.step if index is None else int(index)
    eps = generic_bounding_matrix(alg.step)
    raw, normalized = translation_defect(family, g, h, eps)[i - 1]

    terms = bch_terms(g, h, alg)
    gs = np.asarray([float(v) for v in list(g)])
    hs = np.asarray([float(v) for v in list(h)])
    sl = alg.layer_slice(i)
    v1 = float(np.linalg.norm(gs[sl]))
    for n in range(2, i + 1):
        zn = np.asarray([float(v) for v in terms[n]])
        v1 += float(np.linalg.norm(zn[sl]))

    b = _bracket_bound(alg)
    words_by_len: dict = {}
    for w, c in _dynkin_words().items():
        words_by_len.setdefault(len(w), []).append((w, abs(c)))
    v2 = float(np.linalg.norm(gs[sl]))
    for n in range(2, i + 1):
        m = i - n + 1
        gn = float(np.linalg.norm(_truncate_layers(alg, gs, m)))
        hn = float(np.linalg.norm(_truncate_layers(alg, hs, m)))
        for w, c in words_by_len.get(n, []):
            a = sum(1 for letter in w if letter == 0)
            v2 += float(c) * b ** (n - 1) * gn ** a * hn ** (n - a)

    cert = generic_certificate(family, g, index=i)
    rj = family.layer_norms(h)
    denom = 1.0
    for j in range(1, i):
        denom += rj[j - 1] ** float(i - j)
    v3 = cert["bound"] * denom

    rep = DiagnosticReport(
        title="generic-bound certificate chain",
        anchor="||l_i(gh) - l_i(h)|| <= f_i(g) (1 + sum_j |l_j(h)|^(i-j))",
    )
    slack = 1e-9
    rep.add_check("triangle", raw <= v1 * (1 + slack) + 1e-12, value=raw, threshold=v1)
    rep.add_check("word-bound", v1 <= v2 * (1 + slack) + 1e-12, value=v1, threshold=v2)
    rep.add_check("layer-absorption", v2 <= v3 * (1 + slack) + 1e-12, value=v2, threshold=v3)
    rep.add_check(
        "certificate",
        normalized <= cert["bound"] * (1 + slack) + 1e-12,
        value=normalized,
        threshold=cert["bound"],
    )
    rep.data = {
        "index": i,
        "raw": raw,
        "normalized": normalized,
        "triangle_bound": v1,
        "word_bound": v2,
        "absorbed_bound": v3,
        "ceiling": cert["bound"],
    }
    return rep


# ---------------------------------------------------------------------------
# lattice sup verification


def _box_bounds(algebra, radius: int):
    return [int(round(float(radius) ** algebra.layer(p))) - 1 for p in range(algebra.dim)]


def _enumerate_box(bounds):
    ranges = [np.arange(-b, b + 1) for b in bounds]
    grids = np.meshgrid(*ranges, indexing="ij")
    return np.stack([gr.ravel() for gr in grids], axis=-1).astype(float)


def _probe_box(bounds, rng, samples):
    dim = len(bounds)
    rows = [np.zeros(dim)]
    for p, b in enumerate(bounds):
        for sign in (-1.0, 1.0):
            v = np.zeros(dim)
            v[p] = sign * b
            rows.append(v)
    if dim <= 16:
        for signs in itertools.product((-1.0, 1.0), repeat=dim):
            rows.append(np.array(signs) * np.array(bounds, dtype=float))
    cols = [rng.integers(-b, b + 1, size=samples).astype(float) for b in bounds]
    rows.append(np.stack(cols, axis=-1))
    structured = np.vstack([np.atleast_2d(r) for r in rows])
    return structured


def _batch_defect(algebra, x, big_h):
    """Coordinates of log((exp x)(exp h)) - h for a batch of h (rows).

    The order-n words act by alternating two linear maps: bracketing with the
    fixed x (a dim x dim matrix) and bracketing with the own row of h (a
    per-row matrix, precomputed once)."""
    t = algebra._tensor
    a_x = np.einsum("pqr,p->qr", t, x)
    b_h = np.einsum("pqr,np->nqr", t, big_h)
    diff = np.tile(x, (big_h.shape[0], 1))
    for word, coeff in _dynkin_words().items():
        n = len(word)
        if n < 2 or n > algebra.step:
            continue
        v = big_h if word[-1] == 1 else np.tile(x, (big_h.shape[0], 1))
        for letter in word[-2::-1]:
            if letter == 0:
                v = v @ a_x
            else:
                v = np.einsum("nq,nqr->nr", v, b_h)
            if not v.any():
                v = None
                break
        if v is not None:
            diff = diff + float(coeff) * v
    return diff


def verify_translation_bound(
    family: WeightFamily,
    eps,
    radii,
    *,
    g_samples=None,
    rng=None,
    slope_tol: float = 0.15,
    divergence_slope: float = 0.3,
    reduction_factor: float = 0.5,
    enumeration_cap: int = 120_000,
    samples_per_radius: int = 4000,
    certificate: bool | None = None,
) -> DiagnosticReport:
    """Estimate sup_h of the normalized translation defect over growing
    integer boxes |h_{j,k}| < R^j and fit growth rates.

    Boxes small enough are enumerated outright; larger ones are probed with
    single-coordinate extremes, corner points, and seeded uniform draws.
    The verdict slope comes from log(1 + sup) against log R.  Two
    cross-checks ship with the sups: the closed-form generic ceiling f(g)
    is asserted against every probe (when eps is the generic matrix), and
    each positive entry of eps is reduced by ``reduction_factor`` to confirm
    the bound actually needs it: a reduced entry whose sup ladder turns a
    positive slope is flagged ``diverged``.
    """
    alg = family.algebra
    entries = _eps_entries(eps)
    if len(entries) != alg.step:
        raise ValueError("bounding matrix size must match the layer count")
    radii = sorted(int(r) for r in radii)
    if len(radii) < 4:
        raise ValueError("radius ladder needs at least 4 rungs")
    if rng is None:
        rng = np.random.default_rng(20260814)
    if g_samples is None:
        g_samples = [
            [int(p == k) for k in range(alg.dim)] for p in range(alg.dim)
        ] + [[1] * alg.dim, [3] * alg.dim]

    generic = generic_bounding_matrix(alg.step)
    if certificate is None:
        certificate = entries == generic.entries
    ceilings = None
    if certificate:
        ceilings = [
            [generic_certificate(family, g, index=i)["bound"] for i in range(1, alg.step + 1)]
            for g in g_samples
        ]

    eps_float = [[float(v) for v in row] for row in entries]
    positive = [(i, j) for i in range(alg.step) for j in range(alg.step) if eps_float[i][j] > 0]

    steps = alg.step
    norm_sups = np.zeros((steps, len(radii)))
    raw_sups = np.zeros((steps, len(radii)))
    red_sups = {pair: np.zeros(len(radii)) for pair in positive}
    violations = 0

    for ridx, radius in enumerate(radii):
        bounds = _box_bounds(alg, radius)
        n_points = 1
        for b in bounds:
            n_points *= 2 * b + 1
        if n_points <= enumeration_cap:
            big_h = _enumerate_box(bounds)
        else:
            big_h = _probe_box(bounds, rng, samples_per_radius)
        r_layers = np.stack(
            [
                np.linalg.norm(big_h[:, alg.layer_slice(j)], axis=1)
                for j in range(1, steps + 1)
            ],
            axis=0,
        )
        denom = np.ones((steps, big_h.shape[0]))
        for i in range(steps):
            for j in range(steps):
                e = eps_float[i][j]
                if e > 0:
                    denom[i] += r_layers[j] ** e
        red_denoms = {}
        for (i, j) in positive:
            e = eps_float[i][j]
            red_denoms[(i, j)] = denom[i] - r_layers[j] ** e + r_layers[j] ** (
                e * reduction_factor
            )
        for gidx, g in enumerate(g_samples):
            x = np.asarray([float(v) for v in g])
            diff = _batch_defect(alg, x, big_h)
            for i in range(steps):
                sl = alg.layer_slice(i + 1)
                raw = np.linalg.norm(diff[:, sl], axis=1)
                normalized = raw / denom[i]
                raw_sups[i, ridx] = max(raw_sups[i, ridx], float(raw.max()))
                norm_sups[i, ridx] = max(norm_sups[i, ridx], float(normalized.max()))
                if certificate:
                    f = ceilings[gidx][i]
                    violations += int(np.sum(normalized > f * (1 + 1e-9) + 1e-9))
                for (ii, j) in positive:
                    if ii == i:
                        red = raw / red_denoms[(ii, j)]
                        red_sups[(ii, j)][ridx] = max(
                            red_sups[(ii, j)][ridx], float(red.max())
                        )

    rep = DiagnosticReport(
        title="translation-bound ladder",
        anchor="sup_h ||l_i(gh) - l_i(h)|| / (1 + sum_j |l_j(h)|^eps_ij)",
    )
    rf = [float(r) for r in radii]
    worst = -np.inf
    for i in range(steps):
        rep.fits[f"normalized-l{i + 1}"] = fit_summary(rf, 1.0 + norm_sups[i])
        rep.fits[f"raw-l{i + 1}"] = fit_summary(rf, 1.0 + raw_sups[i])
        slope = rep.fits[f"normalized-l{i + 1}"]["slope"]
        if slope is not None:
            worst = max(worst, slope)
    rep.add_check(
        "bounded",
        worst <= slope_tol,
        value=worst,
        threshold=slope_tol,
        detail="largest growth rate of any normalized defect sup",
    )
    if certificate:
        rep.add_check("certificate", violations == 0, value=violations, threshold=0)

    reductions = {}
    for (i, j), sups in red_sups.items():
        slope, _, _ = loglog_fit(rf, 1.0 + sups)
        reductions[f"{i + 1},{j + 1}"] = {
            "eps": eps_float[i][j] * reduction_factor,
            "slope": slope,
            "diverged": bool(slope is not None and slope > divergence_slope),
            "sups": sups.tolist(),
        }

    rep.data = {
        "radii": radii,
        "normalized_sups": {f"l{i + 1}": norm_sups[i].tolist() for i in range(steps)},
        "raw_sups": {f"l{i + 1}": raw_sups[i].tolist() for i in range(steps)},
        "reductions": reductions,
        "certificate_violations": violations if certificate else None,
        "g_samples": [list(map(int, g)) for g in g_samples],
    }
    return rep


# ---------------------------------------------------------------------------
# lattice truncation


@dataclass
class ConvolutionElement:
    """Finitely supported convolution operator on a lattice ball.

    ``unmasked`` keeps every translate that lands inside the ball;
    ``matrix`` zeroes the rows and columns of points whose translates (by the
    support or its inverses) leave the ball, so that on the unmasked block
    the operator agrees with the full lattice convolution."""

    matrix: np.ndarray
    unmasked: np.ndarray
    mask: np.ndarray
    masked_norm: float
    unmasked_norm: float


@dataclass
class LatticeTruncation:
    """Weight multiplication operators restricted to a finite lattice ball."""

    family: WeightFamily
    radius: int
    chart: str
    points: tuple
    collection: OperatorCollection

    def _index(self):
        return {p: k for k, p in enumerate(self.points)}

    def algebra_element(self, support: dict) -> ConvolutionElement:
        fam = self.family
        alg = fam.algebra
        v = fam.module_dim
        idx = self._index()
        n = len(self.points)
        unmasked = np.zeros((n * v, n * v), dtype=complex)
        mask = np.zeros(n, dtype=bool)
        moves = []
        for h, coeff in support.items():
            hvec = [int(c) for c in h]
            hinv = _group_inverse(hvec, alg, self.chart)
            moves.append((hvec, hinv, complex(coeff)))
        for k, p in enumerate(self.points):
            for hvec, hinv, coeff in moves:
                target = group_multiply(hvec, list(p), alg, chart=self.chart)
                back = group_multiply([Fraction(c) for c in hinv], list(p), alg, chart=self.chart)
                tkey = _as_int_point(target)
                bkey = _as_int_point(back)
                if tkey is not None and tkey in idx:
                    q = idx[tkey]
                    unmasked[q * v : (q + 1) * v, k * v : (k + 1) * v] += coeff * np.eye(v)
                else:
                    mask[k] = True
                if bkey is None or bkey not in idx:
                    mask[k] = True
        matrix = unmasked.copy()
        for k in np.nonzero(mask)[0]:
            matrix[k * v : (k + 1) * v, :] = 0
            matrix[:, k * v : (k + 1) * v] = 0
        return ConvolutionElement(
            matrix=matrix,
            unmasked=unmasked,
            mask=mask,
            masked_norm=float(np.linalg.norm(matrix, ord=2)),
            unmasked_norm=float(np.linalg.norm(unmasked, ord=2)),
        )


def _as_int_point(coords):
    out = []
    for c in coords:
        if isinstance(c, float):
            if abs(c - round(c)) > 1e-9:
                return None
            out.append(int(round(c)))
        else:
            f = Fraction(c)
            if f.denominator != 1:
                return None
            out.append(int(f))
    return tuple(out)


def lattice_truncation(
    family: WeightFamily,
    radius: int,
    chart: str = "second-kind",
    eps: BoundingMatrix | None = None,
    max_matrix_dim: int = 4096,
) -> LatticeTruncation:
    """Multiplication operators M_{l_j} on the integer ball
    {|h_{j,k}| < R^j} tensored with the Clifford module.

    The operators are block diagonal over lattice points, hence strictly
    anticommuting without any tolerance; radius 1 keeps only the identity
    point, where every weight vanishes.
    """
    alg = family.algebra
    r = int(radius)
    if r < 1:
        raise ValueError("radius must be at least 1")
    bounds = _box_bounds(alg, r)
    n_points = 1
    for b in bounds:
        n_points *= 2 * b + 1
    v = family.module_dim
    if n_points * v > max_matrix_dim:
        raise ValueError(
            f"radius {r} gives matrix dimension {n_points * v} > {max_matrix_dim}"
        )
    points = tuple(
        itertools.product(*[range(-b, b + 1) for b in bounds])
    )
    ops = []
    for j in range(1, alg.step + 1):
        op = np.zeros((n_points * v, n_points * v), dtype=complex)
        for k, p in enumerate(points):
            op[k * v : (k + 1) * v, k * v : (k + 1) * v] = family.evaluate(j, list(p))
        ops.append(op)
    grading = None
    if family.grading is not None:
        grading = np.kron(np.eye(n_points), family.grading)
    if eps is None:
        eps = generic_bounding_matrix(alg.step)
    coll = OperatorCollection(ops, grading=grading, eps=eps)
    return LatticeTruncation(
        family=family, radius=r, chart=chart, points=points, collection=coll
    )


# ---------------------------------------------------------------------------
# eigenvalue counting


def _layer_value_arrays(family: WeightFamily, t, radius: int):
    """Sorted arrays of |l_j|^{2 t_j} over the layer sub-boxes; the squared
    eigenvalue at a lattice point is the sum of one entry per layer."""
    alg = family.algebra
    arrays = []
    for j in range(1, alg.step + 1):
        b = int(round(float(radius) ** j)) - 1
        d = alg.layer_dims[j - 1]
        grids = np.meshgrid(*([np.arange(-b, b + 1)] * d), indexing="ij")
        r2 = np.zeros(grids[0].shape)
        for gr in grids:
            r2 = r2 + gr.astype(float) ** 2
        vals = np.sort((r2.ravel()) ** float(t[j - 1]))
        arrays.append(vals)
    return arrays


def _count_below(arrays, budgets):
    if len(arrays) == 1:
        return np.searchsorted(arrays[0], budgets * (1 + 1e-12), side="right")
    head, tail = arrays[0], arrays[1:]
    vals, mult = np.unique(head, return_counts=True)
    out = np.zeros(len(budgets), dtype=np.int64)
    top = float(np.max(budgets))
    for v, m in zip(vals, mult):
        if v > top:
            break
        out += m * _count_below(tail, budgets - v)
    return out


def counting_exponent(
    family: WeightFamily,
    t,
    radius: int,
    n_ladder: int = 8,
    tol: float = 0.4,
) -> DiagnosticReport:
    """Growth exponent of the eigenvalue counting function of the assembled
    lattice operator, without materializing any matrix.

    The assembled square at a lattice point is sum_j |l_j|^{2 t_j} times the
    identity, so N(L) factorizes through per-layer value arrays combined by
    a budgeted merge.  The ladder stays below min_j (R^j - 1)^{t_j}, where
    the box cannot truncate any counted point.  Expected exponent:
    sum_j dim(V_j) / t_j, the homogeneous dimension when t_j = tau/j."""
    alg = family.algebra
    t = [float(v) for v in t]
    if len(t) != alg.step or any(v <= 0 for v in t):
        raise ValueError("t must give one positive exponent per layer")
    arrays = _layer_value_arrays(family, t, int(radius))
    lam_max = 0.999 * min(
        (float(radius) ** j - 1.0) ** t[j - 1] for j in range(1, alg.step + 1)
    )
    lams = np.geomspace(lam_max / 4.0, lam_max, int(n_ladder))
    counts = _count_below(arrays, lams ** 2)
    expected = float(sum(d / tv for d, tv in zip(alg.layer_dims, t)))
    rep = DiagnosticReport(
        title="lattice eigenvalue counting",
        anchor="N(L) = #{points: sum_j |l_j|^(2 t_j) <= L^2}",
    )
    rep.fits["counting"] = fit_summary(lams, counts)
    slope = rep.fits["counting"]["slope"]
    rep.add_check(
        "counting-exponent",
        slope is not None and abs(slope - expected) <= tol,
        value=slope,
        threshold=tol,
        detail=f"expected exponent {expected}",
    )
    rep.data = {
        "radius": int(radius),
        "t": t,
        "lambdas": lams.tolist(),
        "counts": counts.tolist(),
        "expected_exponent": expected,
        "homogeneous_dimension": alg.homogeneous_dimension,
        "eigenvalue_multiplicity": family.module_dim,
    }
    return rep


# ---------------------------------------------------------------------------
# dilations


def dilation_scaling_check(
    family: WeightFamily,
    tau: float,
    samples: int = 20,
    t_values=(2, Fraction(3, 2), Fraction(1, 2)),
    rng=None,
) -> DiagnosticReport:
    """Carnot dilation equivariance, three ways.

    Checks, per sampled g and dilation parameter t: the layer coordinates of
    delta_t(g) are exactly t^j times those of g; the assembled symbol with
    exponents tau/j picks up exactly t^{-tau} under g -> delta_{1/t}(g); and
    the dilation unitary conjugates the weight multiplication operators into
    t^{-j} times themselves, evaluated pointwise on a polynomial section.
    """
    alg = family.algebra
    if not alg.carnot:
        raise ValueError("dilation scaling requires a Carnot (stratified) grading")
    if rng is None:
        rng = np.random.default_rng(20260814)
    dh = alg.homogeneous_dimension
    exact_mismatches = 0
    max_symbol = 0.0
    max_conj = 0.0

    v0 = np.zeros(family.module_dim, dtype=complex)
    v0[0] = 1.0
    v1 = np.zeros(family.module_dim, dtype=complex)
    v1[-1] = 1.0

    def section(p):
        p = np.asarray(p, dtype=float)
        lin = 1.0 + sum((k + 1) * p[k] for k in range(len(p)))
        quad = float(np.sum(p * p))
        return lin * v0 + quad * v1

    for _ in range(int(samples)):
        g = [Fraction(int(v), 2) for v in rng.integers(-6, 7, size=alg.dim)]
        gf = np.asarray([float(v) for v in g])
        for t in t_values:
            tfrac = Fraction(t)
            if tfrac <= 0:
                raise ValueError("dilation parameters must be positive")
            scaled = dilate(g, tfrac, alg)
            for p in range(alg.dim):
                if scaled[p] != g[p] * tfrac ** alg.layer(p):
                    exact_mismatches += 1
            tf = float(tfrac)
            sym = family.assembled_symbol(gf, tau)
            back = family.assembled_symbol(gf / np.array(
                [tf ** alg.layer(p) for p in range(alg.dim)]
            ), tau)
            scale = np.linalg.norm(sym) or 1.0
            max_symbol = max(
                max_symbol, float(np.linalg.norm(back - sym * tf ** (-float(tau))) / scale)
            )
            # [U_t M_j U_t^* xi](p) against t^{-j} [M_j xi](p)
            inv_scales = np.array([tf ** -alg.layer(p) for p in range(alg.dim)])
            fwd_scales = 1.0 / inv_scales
            pt = gf
            shrunk = pt * inv_scales
            for j in range(1, alg.step + 1):
                lhs = tf ** (-dh / 2.0) * (
                    family.evaluate(j, shrunk)
                    @ (tf ** (dh / 2.0) * section(shrunk * fwd_scales))
                )
                rhs = tf ** (-j) * (family.evaluate(j, pt) @ section(pt))
                ref = np.linalg.norm(rhs) or 1.0
                max_conj = max(max_conj, float(np.linalg.norm(lhs - rhs) / ref))

    rep = DiagnosticReport(
        title="Carnot dilation equivariance",
        anchor="U_t M_{l_j} U_t^* = t^{-j} M_{l_j}",
    )
    rep.add_check("layer-scaling", exact_mismatches == 0, value=exact_mismatches, threshold=0)
    rep.add_check("symbol-scaling", max_symbol <= 1e-12, value=max_symbol, threshold=1e-12)
    rep.add_check("unitary-conjugation", max_conj <= 1e-12, value=max_conj, threshold=1e-12)
    rep.data = {
        "tau": float(tau),
        "samples": int(samples),
        "t_values": [float(Fraction(t)) for t in t_values],
        "max_symbol_error": max_symbol,
        "max_conjugation_error": max_conj,
    }
    return rep


# ---------------------------------------------------------------------------
# serialization


def algebra_to_json(algebra: GradedNilpotentAlgebra) -> str:
    """Canonical JSON: step, layer dims, and nonzero structure constants
    keyed by (layer, position) basis labels, coefficients as exact strings."""
    brackets = []
    for (p, q) in sorted(algebra._table):
        coeffs = algebra._table[(p, q)]
        full = [str(coeffs.get(r, Fraction(0))) for r in range(algebra.dim)]
        brackets.append(
            {
                "left": list(algebra.labels[p]),
                "right": list(algebra.labels[q]),
                "coefficients": full,
            }
        )
    payload = {
        "step": algebra.step,
        "layer_dims": list(algebra.layer_dims),
        "brackets": brackets,
    }
    return canonical_json(payload)


def algebra_from_json(text: str) -> GradedNilpotentAlgebra:
    payload = json.loads(text)
    layer_dims = tuple(int(d) for d in payload["layer_dims"])
    if int(payload["step"]) != len(layer_dims):
        raise ValueError("step does not match the number of layers")
    offsets = [0]
    for d in layer_dims:
        offsets.append(offsets[-1] + d)

    def flat(label):
        j, k = int(label[0]), int(label[1])
        if not (1 <= j <= len(layer_dims) and 1 <= k <= layer_dims[j - 1]):
            raise ValueError(f"label {label} out of range")
        return offsets[j - 1] + k - 1

    brackets = {}
    for entry in payload.get("brackets", []):
        p = flat(entry["left"])
        q = flat(entry["right"])
        coeffs = {
            r: Fraction(c)
            for r, c in enumerate(entry["coefficients"])
            if Fraction(c) != 0
        }
        brackets[(p, q)] = coeffs
    return GradedNilpotentAlgebra(layer_dims=layer_dims, brackets=brackets)
