"""Character symbols and oscillator truncations for the 3D Rumin complex.

Two finite-dimensional windows onto the same obstruction:

* characters: the frozen-coefficient commutator against the resolvent
  power (1 + F(xi))^(alpha - 1/2), where F(xi) = xi xi^T + |xi|^2
  (J xi)(J xi)^T.  Along the distinguished ray xi = t J v the norm is
  computable in closed form and grows like t^(2 alpha), so boundedness
  forces alpha <= 0.
* oscillator representations: the three symbol maps of the complex
  0 -> S0 -> S0 (+) S0 -> S0 (+) S0 -> S0 with outer maps (X, Y)^T and
  (Y, -X) and middle matrix ((Z + XY, -X^2), (Y^2, Z - YX)), compressed
  to a Hermite-type basis.

Representation convention (fixed here, not canonical): X -> d/dq,
Y -> i*lam*q, Z -> i*lam, realized on the lam-adapted oscillator basis.
With that choice [X, Y] = Z, the matrices scale exactly with weights
(1, 1, 2) in lam, and -X^2 - Y^2 is diag(lam*(2m+1)).  Operators are
assembled on n + padding basis vectors and then restricted to n, so
every compressed quadratic form entry is exact once padding >= 2.

Sign conventions: J = ((0, -1), (1, 0)), the second coefficient
direction is J v, and the two eigenprojections of F satisfy
e2 = J e1 J^T (conjugation; note J^{-1} = J^T = -J).  Any rotation of
the pair (omega_1, omega_2) conjugates all results.
"""

from dataclasses import dataclass, replace

import numpy as np

from .report import DiagnosticReport, fit_summary

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _as_vec2(x, what):
    v = np.asarray(x, dtype=float)
    if v.shape != (2,) or not np.all(np.isfinite(v)):
        raise ValueError(f"{what} must be a length-2 real vector")
    return v


@dataclass(frozen=True)
class CharacterPoint:
    """A nonzero character together with a frozen coefficient direction."""

    xi: tuple
    v: tuple


def character_point(xi, v) -> CharacterPoint:
    xi = _as_vec2(xi, "xi")
    v = _as_vec2(v, "v")
    if float(xi @ xi) == 0.0:
        raise ValueError("character xi must be nonzero")
    return CharacterPoint(xi=tuple(xi.tolist()), v=tuple(v.tolist()))


@dataclass(frozen=True, repr=False)
class CharacterMatrix:
    """F(xi) with its eigenvalues (|xi|^2, |xi|^4) and eigenprojections."""

    matrix: np.ndarray
    eigenvalues: tuple
    e1: np.ndarray
    e2: np.ndarray


def character_matrix_F(xi) -> CharacterMatrix:
    """F(xi) = xi xi^T + |xi|^2 (J xi)(J xi)^T, diagonalized by xi and J xi."""
    xi = _as_vec2(xi, "xi")
    r2 = float(xi @ xi)
    if r2 == 0.0:
        raise ValueError("character xi must be nonzero")
    jxi = _J @ xi
    e1 = np.outer(xi, xi) / r2
    e2 = np.outer(jxi, jxi) / r2
    return CharacterMatrix(
        matrix=r2 * e1 + r2 * r2 * e2,
        eigenvalues=(r2, r2 * r2),
        e1=e1,
        e2=e2,
    )


def a_alpha(xi, v, alpha) -> np.ndarray:
    """Obstruction matrix (xi (Jv)^T + v (J xi)^T)(1 + F(xi))^(alpha - 1/2)."""
    v = _as_vec2(v, "v")
    if float(v @ v) == 0.0:
        raise ValueError("coefficient direction v must be nonzero")
    cm = character_matrix_F(xi)
    xi = _as_vec2(xi, "xi")
    m = np.outer(xi, _J @ v) + np.outer(v, _J @ xi)
    p = float(alpha) - 0.5
    r2 = cm.eigenvalues[0]
    return m @ ((1.0 + r2) ** p * cm.e1 + (1.0 + r2 * r2) ** p * cm.e2)


def a_alpha_norm(xi, v, alpha) -> float:
    return float(np.linalg.norm(a_alpha(xi, v, alpha), 2))


def ray_profile(v, alpha, t_grid=None) -> dict:
    """Norms of the obstruction matrix along xi = t J v, with a slope fit.

    On this ray the matrix splits over two orthogonal rank-one
    projections, so the profile is exactly
    t |v|^2 max((1 + t^2 |v|^2)^(alpha-1/2), (1 + t^4 |v|^4)^(alpha-1/2)):
    slope 2 alpha for alpha > 0, bounded by |v| at alpha = 0, decaying
    past a finite peak for alpha < 0.
    """
    v = _as_vec2(v, "v")
    if float(v @ v) == 0.0:
        raise ValueError("coefficient direction v must be nonzero")
    if t_grid is None:
        t_grid = np.geomspace(10.0, 1.0e4, 25)
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 4:
        raise ValueError("t grid needs at least 4 sample points")
    if not np.all(t > 0.0):
        raise ValueError("t grid must be positive")
    jv = _J @ v
    norms = np.array([a_alpha_norm(ti * jv, v, alpha) for ti in t])
    return {
        "t_grid": tuple(float(x) for x in t),
        "norms": tuple(float(x) for x in norms),
        "fit": fit_summary(t, norms),
    }


@dataclass(frozen=True)
class OscillatorTruncation:
    """Hermite-basis window: n kept vectors, lam parameter, extra padding."""

    n: int
    lam: float
    padding: int


def oscillator_truncation(n, lam, padding=8) -> OscillatorTruncation:
    n = int(n)
    padding = int(padding)
    lam = float(lam)
    if n < 8:
        raise ValueError("basis size must be at least 8")
    if padding < 2:
        raise ValueError("padding must be at least 2")
    if not np.isfinite(lam):
        raise ValueError("representation parameter must be finite")
    if lam == 0.0:
        raise ValueError("representation parameter must be nonzero")
    return OscillatorTruncation(n=n, lam=lam, padding=padding)


def _generators(m, lam):
    """X = d/dq, Y = i lam q, Z = i lam on m lam-adapted Hermite vectors."""
    a = np.diag(np.sqrt(np.arange(1, m)), 1)
    scale = np.sqrt(abs(lam))
    x = scale * (a - a.T) / np.sqrt(2.0)
    y = 1j * (lam / scale) * (a + a.T) / np.sqrt(2.0)
    z = 1j * lam * np.eye(m)
    return x, y, z


def _require_interior(tr):
    if tr.n < tr.padding:
        raise ValueError(
            f"basis size {tr.n} is too small for padding {tr.padding}"
        )


def _padded_blocks(tr):
    x, y, z = _generators(tr.n + tr.padding, tr.lam)
    d0 = np.vstack([x, y]).astype(complex)
    d1 = np.block([[z + x @ y, -(x @ x)], [y @ y, z - y @ x]])
    d2 = np.hstack([y, -x]).astype(complex)
    return d0, d1, d2


@dataclass(frozen=True, repr=False)
class RuminSymbolBlocks:
    """Truncated blocks of the four-space symbol complex."""

    truncation: OscillatorTruncation
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    d0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def rumin_symbol_matrices(tr: OscillatorTruncation) -> RuminSymbolBlocks:
    """Symbol maps (X,Y)^T, ((Z+XY, -X^2),(Y^2, Z-YX)), (Y,-X), truncated.

    Products are formed on the padded basis first; truncating before
    multiplying would smear commutator defects across the last rows.
    """
    _require_interior(tr)
    n = tr.n
    x, y, z = _generators(tr.n + tr.padding, tr.lam)
    xr, yr, zr = x[:n, :n], y[:n, :n], z[:n, :n]
    d1 = np.block(
        [
            [(z + x @ y)[:n, :n], -(x @ x)[:n, :n]],
            [(y @ y)[:n, :n], (z - y @ x)[:n, :n]],
        ]
    )
    return RuminSymbolBlocks(
        truncation=tr,
        x=xr,
        y=yr,
        z=zr,
        d0=np.vstack([xr, yr]),
        d1=d1,
        d2=np.hstack([yr, -xr]),
    )


def composition_residuals(tr: OscillatorTruncation):
    """Max-abs entries of d1 d0 and d2 d1 composed padded, then restricted.

    Both products are supported entirely at the top padded index, so the
    restriction sees only rounding noise.
    """
    _require_interior(tr)
    d0, d1, d2 = _padded_blocks(tr)
    n, m = tr.n, tr.n + tr.padding
    sel2 = np.r_[0:n, m:m + n]
    r1 = float(np.abs((d1 @ d0)[np.ix_(sel2, np.arange(n))]).max())
    r2 = float(np.abs((d2 @ d1)[np.ix_(np.arange(n), sel2)]).max())
    return r1, r2


def _compressed_laplacians(d0, d1, d2, n, m):
    sel1 = np.arange(n)
    sel2 = np.r_[0:n, m:m + n]
    l0 = (d0.conj().T @ d0)[np.ix_(sel1, sel1)]
    l1 = (d0 @ d0.conj().T + d1.conj().T @ d1)[np.ix_(sel2, sel2)]
    l2 = (d1 @ d1.conj().T + d2.conj().T @ d2)[np.ix_(sel2, sel2)]
    l3 = (d2 @ d2.conj().T)[np.ix_(sel1, sel1)]
    return [l0, l1, l2, l3]


def rockland_check(tr: OscillatorTruncation) -> DiagnosticReport:
    """Injectivity diagnostics for the represented complex.

    Compresses the four Hodge forms to the kept basis vectors (domains
    truncated, ranges padded, so each form is the exact restriction of
    the infinite one) and counts singular values below 1e-6 times the
    largest as approximate cohomology.  For lam != 0 every level bottoms
    out at lam: harmonic-oscillator ground energy at the ends, and the
    same value through the pairing in the middle.
    """
    _require_interior(tr)
    n, m, lam = tr.n, tr.n + tr.padding, tr.lam
    d0, d1, d2 = _padded_blocks(tr)
    laps = _compressed_laplacians(d0, d1, d2, n, m)
    dims, mins, tols = [], [], []
    for lap in laps:
        ev = np.linalg.eigvalsh(lap)
        tol = 1e-6 * float(ev[-1])
        dims.append(int(np.sum(ev < tol)))
        mins.append(float(ev[0]))
        tols.append(tol)
    d0_sigma = float(np.sqrt(max(mins[0], 0.0)))

    # middle matrix on the orthocomplement of the image of d0
    sel2 = np.r_[0:n, m:m + n]
    image = d0[sel2][:, np.arange(n)]
    basis = np.linalg.svd(image)[0]
    complement = basis[:, n:]
    middle = d1[:, sel2] @ complement
    middle_sigma = float(np.linalg.svd(middle, compute_uv=False)[-1])

    # compressed forms are exact, so more padding changes nothing
    wide = _compressed_laplacians(
        *_padded_blocks(replace(tr, padding=tr.padding + 4)), n, m + 4
    )
    drift = max(
        float(np.abs(a - b).max()) for a, b in zip(laps, wide)
    )

    # what skipping the padding would have done to the level-0 form
    xu, yu, _ = _generators(n, lam)
    unpadded = xu.conj().T @ xu + yu.conj().T @ yu
    boundary = float(np.linalg.norm(laps[0] - unpadded, 2))

    gap_floor = float(np.sqrt(abs(lam)) * (1.0 - 1e-9))
    rank_tol = 1e-6 * float(np.linalg.norm(d1, 2))
    rep = DiagnosticReport(
        title="rumin symbol rockland check",
        anchor="0 -> S0 -> S0 x C^2 -> S0 x C^2 -> S0 -> 0",
    )
    rep.add_check(
        "cohomology-vanishing",
        max(dims) == 0,
        float(max(dims)),
        0.0,
        "singular values below 1e-6 * largest, per level",
    )
    rep.add_check(
        "d0-injectivity",
        d0_sigma >= gap_floor,
        d0_sigma,
        gap_floor,
        "compressed -X^2 - Y^2 is diag(lam*(2m+1))",
    )
    rep.add_check(
        "middle-gap",
        middle_sigma > rank_tol,
        middle_sigma,
        rank_tol,
        "smallest singular value off the image of d0",
    )
    rep.add_check(
        "padding-stability",
        drift <= 1e-12,
        drift,
        1e-12,
        "compressed forms identical under padding + 4",
    )
    rep.data = {
        "n": n,
        "lam": lam,
        "padding": tr.padding,
        "dims": tuple(dims),
        "laplacian_mins": tuple(mins),
        "rank_thresholds": tuple(tols),
        "d0_sigma_min": d0_sigma,
        "middle_sigma_min": middle_sigma,
        "boundary_effect": boundary,
    }
    return rep


def _character_norms(xis, v, alpha):
    """Vectorized ||A_alpha(xi)|| over rows of xis (all nonzero)."""
    r2 = np.einsum("ki,ki->k", xis, xis)
    jxis = xis @ _J.T
    jv = _J @ v
    e1 = xis[:, :, None] * xis[:, None, :] / r2[:, None, None]
    e2 = jxis[:, :, None] * jxis[:, None, :] / r2[:, None, None]
    m = xis[:, :, None] * jv[None, None, :] + v[None, :, None] * jxis[:, None, :]
    p = float(alpha) - 0.5
    res = (1.0 + r2) ** p
    res2 = (1.0 + r2 * r2) ** p
    a = m @ (res[:, None, None] * e1 + res2[:, None, None] * e2)
    return np.linalg.svd(a, compute_uv=False)[:, 0]


def naive_rollup_demo(
    radii=(32.0, 64.0, 128.0, 256.0),
    alphas=(0.0, 0.1, 0.25),
    *,
    v=(1.0, 0.0),
    angles=360,
) -> DiagnosticReport:
    """Grid sups of the obstruction norm over growing character disks.

    Every rung shares a fixed core grid below radii[0]/2 and extends a
    tail out to its own radius, so a bounded profile gives a flat
    ladder while a divergent one is measured on fresh territory.
    Checks: sup increments below 1e-3 for alpha <= 0, fitted slope
    2 alpha (within 0.03) for alpha > 0.
    """
    radii = tuple(float(r) for r in radii)
    if len(radii) < 3:
        raise ValueError("radius ladder needs at least three rungs")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    if radii[0] < 2.0:
        raise ValueError("first radius must be at least 2")
    alphas = tuple(float(a) for a in alphas)
    if not alphas:
        raise ValueError("alpha list must not be empty")
    v = _as_vec2(v, "v")
    if float(v @ v) == 0.0:
        raise ValueError("coefficient direction v must be nonzero")

    theta = np.linspace(0.0, 2.0 * np.pi, int(angles), endpoint=False)
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    core = np.geomspace(0.5, radii[0] / 2.0, 33)
    sups = {a: [] for a in alphas}
    for r_max in radii:
        rr = np.concatenate([core, np.geomspace(radii[0] / 2.0, r_max, 40)])
        xis = (rr[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
        for a in alphas:
            sups[a].append(float(_character_norms(xis, v, a).max()))

    rep = DiagnosticReport(
        title="naive rollup obstruction ladder",
        anchor="[D,a](1+D^2)^(alpha-1/2) bounded forces alpha <= 0",
    )
    for a in alphas:
        vals = sups[a]
        if a > 0:
            fit = fit_summary(np.array(radii), np.array(vals))
            rep.fits[f"alpha={a:g}"] = fit
            rep.add_check(
                f"slope-alpha={a:g}",
                fit["slope"] is not None and abs(fit["slope"] - 2 * a) <= 0.03,
                fit["slope"],
                2 * a,
                "log-log growth rate of the grid sup",
            )
        else:
            inc = float(max(np.diff(vals))) if len(vals) > 1 else 0.0
            rep.add_check(
                f"bounded-alpha={a:g}",
                inc < 1e-3,
                inc,
                1e-3,
                "largest successive increase of the grid sup",
            )
    rep.data = {
        "radii": list(radii),
        "alphas": [float(a) for a in alphas],
        "v": [float(x) for x in v],
        "sups": {f"{a:g}": [float(x) for x in sups[a]] for a in alphas},
    }
    return rep
