"""Command-line workbench: direct subcommands plus a config-driven registry.

The shell contract is fixed so ladders can be scripted: exit 0 when every
check in the produced report passes, exit 1 when a check fails, exit 2 for
unknown experiments or malformed input.  ``report run`` writes a
schema-versioned JSON report, one CSV per data series, and a PNG rendering
next to each CSV.  Identical config and seed give identical report bytes
(the output directory is deliberately left out of the payload, so moving a
run does not change its fingerprint).

Config files are plain ``key = JSON`` lines; blank lines and # comments are
skipped:

    experiment = "shear-torus"
    ladder = [8, 16, 32, 64]
    seed = 7
"""

import difflib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import click
import matplotlib
import numpy as np

matplotlib.use("Agg")

from . import complexes, dynamics, nilpotent, opcalc, symbols, tropical
from .report import DiagnosticReport, canonical_json, fit_summary, write_csv

SCHEMA_VERSION = "st2.report.v1"
DEFAULT_SEED = 20260814


# ---------------------------------------------------------------------------
# configuration


def parse_config(text: str) -> dict:
    """Parse `key = JSON` lines into a mapping; comments and blanks skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected `key = value`, got {line!r}")
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        try:
            out[key] = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ValueError(
                f"line {lineno}: value for {key!r} is not valid JSON ({exc})"
            ) from None
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment invocation: registry name, free-form inputs, ladder,
    seed, output directory, and the three tolerance overrides (None keeps the
    library default)."""

    experiment: str
    inputs: dict
    ladder: tuple | None
    seed: int
    outdir: str
    anticommute_tol: float | None
    slope_tol: float | None
    psd_tol: float | None


def experiment_config(mapping, *, seed=None, outdir=None) -> ExperimentConfig:
    """Shape-check a parsed config; flag overrides beat file values.

    Registry membership is checked at run time, not here, so configs for
    experiments registered elsewhere still parse.
    """
    mapping = dict(mapping)
    name = mapping.pop("experiment", None)
    if not isinstance(name, str) or not name:
        raise ValueError("config is missing an experiment name")
    raw_seed = mapping.pop("seed", DEFAULT_SEED)
    if seed is not None:
        raw_seed = seed
    if isinstance(raw_seed, bool) or not isinstance(raw_seed, int):
        raise ValueError("seed must be an integer")
    ladder = mapping.pop("ladder", None)
    if ladder is not None:
        vals = list(ladder)
        for v in vals:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValueError("ladder entries must be numeric")
        if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("ladder must be strictly increasing")
        ladder = tuple(vals)
    out = mapping.pop("out", ".")
    if outdir is not None:
        out = outdir
    tols = {}
    for key in ("anticommute_tol", "slope_tol", "psd_tol"):
        v = mapping.pop(key, None)
        if v is not None:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
                raise ValueError(f"{key} must be positive")
            v = float(v)
        tols[key] = v
    return ExperimentConfig(
        experiment=name,
        inputs=mapping,
        ladder=ladder,
        seed=raw_seed,
        outdir=str(out),
        **tols,
    )


def _flag_config(experiment, *, ladder=None, seed=DEFAULT_SEED,
                 slope_tol=None, psd_tol=None, **inputs) -> ExperimentConfig:
    inputs = {k: v for k, v in inputs.items() if v is not None}
    return ExperimentConfig(
        experiment=experiment,
        inputs=inputs,
        ladder=tuple(ladder) if ladder else None,
        seed=int(seed),
        outdir=".",
        anticommute_tol=None,
        slope_tol=slope_tol,
        psd_tol=psd_tol,
    )


def _rng(cfg: ExperimentConfig):
    return np.random.default_rng(cfg.seed)


def _fold(rep: DiagnosticReport, sub: DiagnosticReport, prefix: str = "") -> None:
    for c in sub.checks:
        rep.add_check(prefix + c.name, c.passed, value=c.value,
                      threshold=c.threshold, detail=c.detail)


def _haar_unitary(rng, n: int) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def _random_hermitian(rng, n: int) -> np.ndarray:
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (m + m.conj().T) / 2.0


# ---------------------------------------------------------------------------
# experiment runners


@dataclass(frozen=True)
class ExperimentResult:
    report: DiagnosticReport
    series: tuple = ()  # of (name, header, rows)


def _run_g2_cone(cfg: ExperimentConfig) -> ExperimentResult:
    inputs = cfg.inputs
    orders = None
    if "matrix_file" in inputs:
        eps = tropical.BoundingMatrix.from_json(
            json.loads(Path(inputs["matrix_file"]).read_text()))
    elif "matrix" in inputs:
        eps = tropical.BoundingMatrix.from_json(inputs["matrix"])
    else:
        orders = [int(v) for v in inputs.get("orders", (1, 3, 2, 3, 1))]
        eps = tropical.complex_bounding_matrix(orders)
    rep = DiagnosticReport(
        title="bounding-matrix cone membership",
        anchor="Omega(eps) = {t > 0 : eps_ij t_i < t_j}",
    )
    cyc = tropical.check_decreasing_cycle(eps)
    rep.add_check(
        "decreasing-cycle", cyc.ok,
        value=None if cyc.product is None else float(cyc.product),
        threshold=1.0,
        detail="every directed cycle needs weight product below 1",
    )
    series = []
    if orders is not None:
        ray = tropical.prescribed_order_ray(orders, tau=inputs.get("tau", 1))
        rep.add_check("ray-membership", tropical.cone_contains(eps, ray),
                      detail="t_j = tau / m_j")
        rep.data["orders"] = orders
        rep.data["ray"] = [str(v) for v in ray.values]
        series.append(("ray", ("level", "exponent"),
                       [(i + 1, float(v)) for i, v in enumerate(ray.values)]))
    sample = tropical.cone_sample(eps)
    if cyc.ok:
        sample_ok = sample is not None and tropical.cone_contains(eps, sample)
    else:
        sample_ok = sample is None
    rep.add_check("sample-membership", sample_ok,
                  detail="relaxation sample agrees with cone nonemptiness")
    if sample is not None:
        rep.data["sample"] = [str(v) for v in sample.values]
    if cyc.cycle is not None:
        rep.data["cycle"] = [int(v) for v in cyc.cycle]
    rep.data["matrix"] = eps.to_json()
    rep.data["exact"] = eps.is_exact
    return ExperimentResult(rep, tuple(series))


def _run_heisenberg_weights(cfg: ExperimentConfig) -> ExperimentResult:
    alg = nilpotent.heisenberg_algebra()
    fam = nilpotent.weight_family(alg)
    eps = nilpotent.generic_bounding_matrix(alg.step)
    radii = tuple(int(r) for r in (cfg.ladder or (5, 10, 20, 40)))
    g_samples = cfg.inputs.get("g_samples")
    if g_samples is not None:
        try:
            g_samples = [[int(c) for c in g] for g in g_samples]
        except TypeError as exc:
            raise ValueError(
                "g_samples must be a list of lattice coordinate vectors"
            ) from exc
    extra = {}
    if "samples_per_radius" in cfg.inputs:
        extra["samples_per_radius"] = int(cfg.inputs["samples_per_radius"])
    rep = nilpotent.verify_translation_bound(
        fam, eps, radii,
        g_samples=g_samples,
        rng=_rng(cfg),
        slope_tol=cfg.slope_tol if cfg.slope_tol is not None else 0.15,
        **extra,
    )
    count = nilpotent.counting_exponent(fam, (1, Fraction(1, 2)), radius=max(radii))
    _fold(rep, count)
    rep.fits["counting"] = count.fits["counting"]
    rep.data["counting"] = count.data
    layers = sorted(rep.data["normalized_sups"])
    header = ("radius", *(f"normalized_{l}" for l in layers),
              *(f"raw_{l}" for l in layers))
    rows = [
        (float(r),
         *(rep.data["normalized_sups"][l][k] for l in layers),
         *(rep.data["raw_sups"][l][k] for l in layers))
        for k, r in enumerate(radii)
    ]
    series = (
        ("defect-ladder", header, rows),
        ("counting", ("scale", "count"),
         list(zip(count.data["lambdas"], count.data["counts"]))),
    )
    return ExperimentResult(rep, series)


def _run_carnot_dilation(cfg: ExperimentConfig) -> ExperimentResult:
    fam = nilpotent.weight_family(nilpotent.heisenberg_algebra())
    tau = float(cfg.inputs.get("tau", 1.0))
    samples = int(cfg.inputs.get("samples", 200))
    kwargs = {}
    if "t_values" in cfg.inputs:
        kwargs["t_values"] = tuple(cfg.inputs["t_values"])
    rep = nilpotent.dilation_scaling_check(fam, tau=tau, samples=samples,
                                           rng=_rng(cfg), **kwargs)
    rows = [(samples, rep.data["max_symbol_error"], rep.data["max_conjugation_error"])]
    series = (("errors",
               ("samples", "max_symbol_error", "max_conjugation_error"), rows),)
    return ExperimentResult(rep, series)


def _run_shear_torus(cfg: ExperimentConfig) -> ExperimentResult:
    inputs = cfg.inputs
    action = tuple(tuple(int(v) for v in row)
                   for row in inputs.get("action", ((1, 1), (0, 1))))
    # (0, 1) is moved linearly by the shear, keeping the dense replay small
    mode = tuple(int(v) for v in inputs.get("mode", (0, 1)))
    sizes = tuple(int(s) for s in (cfg.ladder or (8, 16, 32, 64)))
    theta = inputs.get("theta")
    if theta is not None:
        theta = np.asarray(theta, dtype=float)
    rep = dynamics.crossed_order_diagnostic(
        action, mode, sizes, theta=theta,
        slope_tol=cfg.slope_tol if cfg.slope_tol is not None else 0.05,
    )
    rows = list(zip(rep.data["sizes"], rep.data["normalized_sups"],
                    rep.data["raw_sups"]))
    return ExperimentResult(
        rep, (("ladder", ("window", "normalized_sup", "raw_sup"), rows),))


def _run_nctorus(cfg: ExperimentConfig) -> ExperimentResult:
    inputs = cfg.inputs
    cutoff = int(inputs.get("cutoff", 8))
    theta_val = float(inputs.get("theta", 0.375))
    orders = tuple(int(n) for n in (cfg.ladder or (1, 2, 4, 8, 16)))
    action = tuple(tuple(int(v) for v in row)
                   for row in inputs.get("action", ((1, 1), (0, 1))))
    x = tuple(int(v) for v in inputs.get("mode", (0, 1)))
    theta = np.array([[0.0, theta_val], [-theta_val, 0.0]])
    trunc = dynamics.torus_truncation(2, cutoff, theta=theta)
    rep = DiagnosticReport(
        title="noncommutative torus orbit commutators",
        anchor="||[D, l(A^n x)]|| = scale * ||V A^n x||",
    )
    rows, gaps, interior = [], [], []
    for n in orders:
        r = dynamics.nctorus_commutator_norm(trunc, x, action, n)
        rows.append((n, r["closed_form"], r["matrix_norm"]))
        if not r["overflow"]:
            gaps.append(abs(r["matrix_norm"] - r["closed_form"])
                        / (1.0 + r["closed_form"]))
            interior.append((n, r["closed_form"]))
    if not gaps:
        raise ValueError("cutoff too small: every shifted mode overflows the window")
    rep.add_check("closed-form-match", max(gaps) <= 1e-10,
                  value=max(gaps), threshold=1e-10,
                  detail="dense commutators against the closed form on interior modes")
    if len(interior) >= 4:
        ns = [n for n, _ in interior]
        vals = [v for _, v in interior]
        rep.fits["growth"] = fit_summary(ns, vals)
        slope = rep.fits["growth"]["slope"]
        rep.add_check("growth-order",
                      slope is not None and abs(slope - 1.0) <= 0.15,
                      value=slope, threshold=1.0,
                      detail="shear orbit length grows linearly in n")
    rep.data.update(cutoff=cutoff, theta=theta_val, orders=list(orders),
                    mode=list(x))
    return ExperimentResult(
        rep, (("commutator-ladder", ("n", "closed_form", "matrix_norm"), rows),))


def _run_mobius(cfg: ExperimentConfig) -> ExperimentResult:
    inputs = cfg.inputs
    ns = tuple(int(n) for n in (cfg.ladder or (1, 2, 3)))
    grid = int(inputs.get("grid", 250))
    lam = float(inputs.get("lam", 2.0))
    golden = (3.0 + np.sqrt(5.0)) / 2.0
    parabolic = np.array([[1.0, 1.0], [0.0, 1.0]])
    loxodromic = np.array([[lam, 0.0], [0.0, 1.0 / lam]])
    c, s = np.cos(1.0), np.sin(1.0)
    elliptic = np.array([[c, -s], [s, c]])
    rep = DiagnosticReport(
        title="moebius jacobian suprema",
        anchor="sup |J(g^n)| on the round sphere, closed form vs grid search",
    )
    rep.add_check(
        "classification",
        dynamics.mobius_classify(parabolic) == "parabolic"
        and dynamics.mobius_classify(loxodromic) == "loxodromic"
        and dynamics.mobius_classify(elliptic) == "elliptic",
        detail="trace classification of the three model maps",
    )
    par = [dynamics.mobius_jacobian_sup(parabolic, n) for n in ns]
    lox = [dynamics.mobius_jacobian_sup(loxodromic, n) for n in ns]
    ell = [dynamics.mobius_jacobian_sup(elliptic, n) for n in ns]
    if 1 in ns:
        got = par[ns.index(1)]
        rep.add_check("parabolic-unit", abs(got - golden) <= 1e-12,
                      value=got, threshold=golden,
                      detail="(3 + sqrt(5)) / 2 at n = 1")
    lox_gap = max(abs(v - lam ** (2 * n)) / lam ** (2 * n)
                  for v, n in zip(lox, ns))
    rep.add_check("loxodromic-closed", lox_gap <= 1e-12,
                  value=lox_gap, threshold=1e-12,
                  detail="sup equals lam^(2n) for the diagonal map")
    ell_gap = max(abs(v - 1.0) for v in ell)
    rep.add_check("elliptic-isometry", ell_gap <= 1e-12,
                  value=ell_gap, threshold=1e-12)
    brute_gaps = []
    for mat, closed in ((parabolic, par), (loxodromic, lox)):
        for n, v in zip(ns, closed):
            b = dynamics.mobius_brute_force_sup(mat, n, grid=grid)
            brute_gaps.append(abs(b - v) / v)
    rep.add_check("brute-force-agreement", max(brute_gaps) <= 0.01,
                  value=max(brute_gaps), threshold=0.01,
                  detail="grid search within 1 percent of the closed form")
    rep.data.update(orders=list(ns), grid=grid, parabolic=par,
                    loxodromic=lox, elliptic=ell)
    rows = list(zip(ns, par, lox, ell))
    return ExperimentResult(
        rep, (("jacobian-sups", ("n", "parabolic", "loxodromic", "elliptic"), rows),))


def _sl2_structure() -> np.ndarray:
    # basis (e, h, f): [h, e] = 2e, [h, f] = -2f, [e, f] = h
    t = np.zeros((3, 3, 3))
    t[1, 0, 0] = 2.0
    t[0, 1, 0] = -2.0
    t[1, 2, 2] = -2.0
    t[2, 1, 2] = 2.0
    t[0, 2, 1] = 1.0
    t[2, 0, 1] = -1.0
    return t


def _run_nilflow(cfg: ExperimentConfig) -> ExperimentResult:
    step = int(cfg.inputs.get("filiform_step", 5))
    heis = nilpotent.heisenberg_algebra().structure_tensor()
    fil = nilpotent.filiform_algebra(step).structure_tensor()
    flows = (
        ("heisenberg-x", heis, np.eye(heis.shape[0])[0]),
        (f"filiform{step}-x", fil, np.eye(fil.shape[0])[0]),
        ("sl2-horocycle", _sl2_structure(), np.array([1.0, 0.0, 0.0])),
    )
    rep = DiagnosticReport(
        title="adjoint growth along one-parameter flows",
        anchor="||Ad_{exp tX}|| ~ t^degree with degree the top ad_X power",
    )
    t_grid = None
    cols = []
    for name, tensor, x in flows:
        sub = dynamics.adjoint_growth(tensor, x)
        _fold(rep, sub, prefix=f"{name}:")
        rep.fits[name] = sub.fits["growth"]
        rep.data[name] = {"degree": sub.data["degree"],
                          "doubled_slope": sub.data["doubled_slope"]}
        t_grid = sub.data["t_grid"]
        cols.append((name, sub.data["norms"]))
    header = ("t", *(n for n, _ in cols))
    rows = list(zip(t_grid, *(c for _, c in cols)))
    return ExperimentResult(rep, (("growth", header, rows),))


def _run_interp_region(cfg: ExperimentConfig) -> ExperimentResult:
    inputs = cfg.inputs
    dim = int(inputs.get("dim", 40))
    k = int(inputs.get("grid", 12))
    instances = int(inputs.get("instances", 1))
    slack = cfg.psd_tol if cfg.psd_tol is not None else 1e-9
    rng = _rng(cfg)
    alpha = np.linspace(0.05, 0.9, k)
    beta = np.linspace(0.0, 1.2, k)
    rep = DiagnosticReport(
        title="two-parameter interpolation region scan",
        anchor="log sup_y e^{a^2-y^2} ||[A|A|^{-1+a+iy}, T] B^{-b}|| three-line bound",
    )
    had_viol = shape_viol = triples = 0
    table = None
    for _ in range(instances):
        u = _haar_unitary(rng, dim)
        a = (u * rng.uniform(-3.0, 3.0, dim)) @ u.conj().T
        a = (a + a.conj().T) / 2.0
        b = (u * rng.uniform(1.0, 4.0, dim)) @ u.conj().T
        b = (b + b.conj().T) / 2.0
        t = _random_hermitian(rng, dim)
        sub = opcalc.interpolation_region(a, b, t, alpha, beta, slack=slack)
        by_name = {c.name: c for c in sub.checks}
        had_viol += int(by_name["hadamard-triples"].value)
        shape_viol += int(by_name["region-shape"].value)
        triples += int(sub.data["hadamard_triples"])
        table = np.asarray(sub.data["n_table"])
    rep.add_check("hadamard-triples", had_viol == 0, value=had_viol, threshold=0,
                  detail=f"three-line violations over {instances} instance(s), "
                         f"{triples} triples")
    rep.add_check("region-shape", shape_viol == 0, value=shape_viol, threshold=0,
                  detail="sub-level near-convexity predicate")
    rep.data.update(dim=dim, instances=instances, triples=triples,
                    alpha=[float(v) for v in alpha],
                    beta=[float(v) for v in beta])
    rows = [(float(alpha[i]), float(beta[j]), float(table[i, j]))
            for i in range(k) for j in range(k)]
    return ExperimentResult(rep, (("norm-table", ("alpha", "beta", "norm"), rows),))


def _run_rumin_symbols(cfg: ExperimentConfig) -> ExperimentResult:
    inputs = cfg.inputs
    lams = tuple(float(v) for v in (cfg.ladder or (1.0, 2.0, 4.0)))
    n = int(inputs.get("n", 64))
    padding = int(inputs.get("padding", 8))
    rep = DiagnosticReport(
        title="rumin symbol battery",
        anchor="0 -> S0 -> S0 x C^2 -> S0 x C^2 -> S0 -> 0",
    )
    mins_rows = []
    for lam in lams:
        tr = symbols.oscillator_truncation(n, lam, padding)
        sub = symbols.rockland_check(tr)
        _fold(rep, sub, prefix=f"lam={lam:g}:")
        r1, r2 = symbols.composition_residuals(tr)
        rep.add_check(f"lam={lam:g}:composition", max(r1, r2) <= 1e-10,
                      value=max(r1, r2), threshold=1e-10,
                      detail="d1 d0 and d2 d1 vanish on the interior window")
        rep.data[f"lam={lam:g}"] = {
            "dims": list(sub.data["dims"]),
            "laplacian_mins": list(sub.data["laplacian_mins"]),
        }
        mins_rows.append(sub.data["laplacian_mins"])
    alphas = tuple(float(a) for a in inputs.get("alphas", (0.0, 0.1, 0.25)))
    demo = symbols.naive_rollup_demo(alphas=alphas)
    _fold(rep, demo)
    rep.fits.update(demo.fits)
    rep.data["rollup"] = demo.data
    series = [("laplacian-mins", ("level", *(f"lam{b:g}" for b in lams)),
               [(lvl, *(mins_rows[i][lvl] for i in range(len(lams))))
                for lvl in range(4)])]
    ray_alphas = [a for a in alphas if a > 0] or [0.25]
    for a in ray_alphas:
        prof = symbols.ray_profile((1.0, 0.0), a)
        rep.fits[f"ray-alpha={a:g}"] = prof["fit"]
        series.append((f"ray-alpha{a:g}", ("t", "norm"),
                       list(zip(prof["t_grid"], prof["norms"]))))
    return ExperimentResult(rep, tuple(series))


@dataclass(frozen=True)
class Experiment:
    runner: object
    anchor: str


EXPERIMENTS = {
    "g2-cone": Experiment(
        _run_g2_cone,
        "Omega(eps) = {t > 0 : eps_ij t_i < t_j} for the weighted five-level complex"),
    "heisenberg-weights": Experiment(
        _run_heisenberg_weights,
        "sup_g |l(gh) - l(h)| <= C prod_j (1 + |l_j(h)|)^eps_ij on lattice balls"),
    "carnot-dilation": Experiment(
        _run_carnot_dilation,
        "U_t M_{l_j} U_t^* = t^-j M_{l_j} under the dilation unitaries"),
    "shear-torus": Experiment(
        _run_shear_torus,
        "||[D, a_g]|| <= C (1 + |g|^s) on the crossed-product window ladder"),
    "nctorus": Experiment(
        _run_nctorus,
        "||[D, l(A^n x)]|| = scale * ||V A^n x|| on the twisted torus"),
    "mobius": Experiment(
        _run_mobius,
        "sup |J(g^n)| = sigma_1(g^n)^2: parabolic, loxodromic, elliptic closed forms"),
    "nilflow": Experiment(
        _run_nilflow,
        "||Ad_{exp tX}|| ~ t^degree for nilpotent ad_X"),
    "interp-region": Experiment(
        _run_interp_region,
        "Hadamard three-line bound over the paired (alpha, beta) grid"),
    "rumin-symbols": Experiment(
        _run_rumin_symbols,
        "Rockland property and composition defects of the oscillator Rumin blocks"),
}


def list_experiments() -> dict:
    """Registered experiment names mapped to their one-line formula anchors."""
    return {name: EXPERIMENTS[name].anchor for name in sorted(EXPERIMENTS)}


def _unknown_experiment(name: str) -> str:
    close = difflib.get_close_matches(name, EXPERIMENTS, n=3, cutoff=0.4)
    hint = f" did you mean: {', '.join(close)}?" if close else ""
    return (f"unknown experiment {name!r}.{hint} "
            f"available: {', '.join(sorted(EXPERIMENTS))}")


def execute(cfg: ExperimentConfig) -> ExperimentResult:
    try:
        spec = EXPERIMENTS[cfg.experiment]
    except KeyError:
        raise ValueError(_unknown_experiment(cfg.experiment)) from None
    return spec.runner(cfg)


def write_outputs(cfg: ExperimentConfig, result: ExperimentResult) -> Path:
    """Report JSON plus one CSV and one PNG per series, under cfg.outdir."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "anchor": result.report.anchor,
        "config": {
            "experiment": cfg.experiment,
            "seed": cfg.seed,
            "ladder": list(cfg.ladder) if cfg.ladder is not None else None,
            "inputs": cfg.inputs,
            "tolerances": {
                "anticommute_tol": cfg.anticommute_tol,
                "slope_tol": cfg.slope_tol,
                "psd_tol": cfg.psd_tol,
            },
        },
        "report": result.report.to_json(),
    }
    path = outdir / f"{cfg.experiment}-report.json"
    path.write_text(canonical_json(payload))
    for name, header, rows in result.series:
        # plain concatenation: series names may contain dots, which
        # Path.with_suffix would misread as an extension
        base = outdir / f"{cfg.experiment}-{name}"
        rows = [tuple(row) for row in rows]
        write_csv(Path(f"{base}.csv"), list(header), rows)
        _render_series(Path(f"{base}.png"), list(header), rows)
    return path


def run(cfg: ExperimentConfig) -> int:
    """Execute a configured experiment, write its outputs, return exit code."""
    result = execute(cfg)
    write_outputs(cfg, result)
    return 0 if result.report.passed else 1


def _render_series(path, header, rows) -> None:
    import matplotlib.pyplot as plt

    cols = [[float(v) for v in col] for col in zip(*rows)]
    x = cols[0]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, col in zip(header[1:], cols[1:]):
        ax.plot(x, col, marker="o", markersize=3, linewidth=1.0, label=label)
    if min(x) > 0 and max(x) / min(x) > 30:
        ax.set_xscale("log")
    flat = [v for col in cols[1:] for v in col]
    if flat and min(flat) > 0 and max(flat) / min(flat) > 30:
        ax.set_yscale("log")
    ax.set_xlabel(header[0])
    ax.grid(True, alpha=0.3)
    if len(header) > 2:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


# ---------------------------------------------------------------------------
# click surface


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _echo_report(rep: DiagnosticReport) -> None:
    click.echo(rep.title)
    for c in rep.checks:
        line = f"[{'PASS' if c.passed else 'FAIL'}] {c.name}"
        if c.value is not None:
            line += f" value={_fmt(c.value)}"
        if c.threshold is not None:
            line += f" threshold={_fmt(c.threshold)}"
        if c.detail:
            line += f" ({c.detail})"
        click.echo(line)


def _finish(rep: DiagnosticReport):
    _echo_report(rep)
    raise SystemExit(0 if rep.passed else 1)


def _int_list_cb(_ctx, _param, value):
    if value is None:
        return None
    try:
        return tuple(int(v) for v in str(value).split(","))
    except ValueError:
        raise click.UsageError(
            f"expected comma-separated integers, got {value!r}") from None


def _load_matrix(path):
    try:
        blob = json.loads(Path(path).read_text())
        return tropical.BoundingMatrix.from_json(blob)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise click.UsageError(f"could not load bounding matrix from {path}: {exc}")


@click.group()
def main():
    """Spectral-triple workbench: cones, assembly identities, experiment reports."""


@main.group()
def cone():
    """Bounding-matrix cone membership and sampling."""


@cone.command("check")
@click.option("--matrix", "matrix_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--point", default=None,
              help="JSON list of exponents; entries may be 'p/q' strings.")
def cone_check(matrix_path, point):
    """Decide cone nonemptiness, optionally testing a point."""
    eps = _load_matrix(matrix_path)
    rep = DiagnosticReport(title="cone check",
                           anchor="Omega(eps) = {t > 0 : eps_ij t_i < t_j}")
    cyc = tropical.check_decreasing_cycle(eps)
    rep.add_check("decreasing-cycle", cyc.ok,
                  value=None if cyc.product is None else float(cyc.product),
                  threshold=1.0)
    if point is not None:
        try:
            inside = tropical.cone_contains(eps, json.loads(point))
        except (ValueError, TypeError) as exc:
            raise click.UsageError(f"bad point: {exc}")
        rep.add_check("point-membership", inside, detail=point)
    _finish(rep)


@cone.command("sample")
@click.option("--matrix", "matrix_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
def cone_sample_cmd(matrix_path):
    """Produce an interior point of the cone if one exists."""
    eps = _load_matrix(matrix_path)
    t = tropical.cone_sample(eps)
    rep = DiagnosticReport(title="cone sample",
                           anchor="relaxation point of Omega(eps)")
    rep.add_check("sample", t is not None and tropical.cone_contains(eps, t),
                  detail="exact relaxation point" if t is not None
                  else "cone is empty")
    if t is not None:
        click.echo("sample: (" + ", ".join(str(v) for v in t.values) + ")")
    _finish(rep)


@main.group()
def assemble():
    """Assembled-operator identities for anticommuting families."""


@assemble.command("identity")
@click.option("--n-ops", default=4, show_default=True)
@click.option("--qubits", default=3, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
@click.option("--samples", default=5, show_default=True)
@click.option("--tol", default=None, type=float)
def assemble_identity(n_ops, qubits, seed, samples, tol):
    """Check the assembled square against the exponent-weighted sum."""
    rng = np.random.default_rng(seed)
    try:
        cg = opcalc.clifford_generators(n_ops, qubits=qubits)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    u = _haar_unitary(rng, cg.dim)
    scales = rng.uniform(0.5, 2.0, n_ops)
    ops = [s * (u @ g @ u.conj().T) for s, g in zip(scales, cg.gammas)]
    coll = opcalc.OperatorCollection(ops, tol=tol)
    worst = 0.0
    for _ in range(samples):
        t = rng.uniform(0.4, 1.6, n_ops)
        dbar = opcalc.assemble(coll, t, check=False)
        gap = np.linalg.norm(dbar @ dbar - opcalc.delta_form(coll, t), 2)
        worst = max(worst, gap)
    rep = DiagnosticReport(title="assembled square identity",
                           anchor="bar(D)_t^2 = sum_j |D_j|^{2 t_j}")
    bound = 1e-10 * cg.dim
    rep.add_check("assembly-identity", worst <= bound, value=worst,
                  threshold=bound,
                  detail=f"{samples} exponent samples on dimension {cg.dim}")
    rep.data.update(dim=cg.dim, n_ops=n_ops, samples=samples)
    _finish(rep)


@main.group()
def verify():
    """Bounded-transform and commutator-sandwich identities."""


@verify.command("bounded")
@click.option("--dim", default=24, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def verify_bounded(dim, seed):
    """Algebraic identity of the bounded transform on a random operator."""
    rng = np.random.default_rng(seed)
    d = _random_hermitian(rng, dim)
    f = opcalc.bounded_transform(d)
    resid = np.linalg.norm(
        f @ f - np.eye(dim) + np.linalg.inv(np.eye(dim) + d @ d), 2)
    rep = DiagnosticReport(title="bounded transform identity",
                           anchor="F^2 - 1 = -(1 + D^2)^{-1}")
    rep.add_check("bounded-transform", resid <= 1e-12, value=resid,
                  threshold=1e-12)
    _finish(rep)


@verify.command("sww")
@click.option("--dim", default=24, show_default=True)
@click.option("--power", default=2, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
@click.option("--psd-tol", default=None, type=float)
def verify_sww(dim, power, seed, psd_tol):
    """Two-sided sandwich bound for the transformed commutator at order m."""
    rng = np.random.default_rng(seed)
    d = _random_hermitian(rng, dim)
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    a = m - m.conj().T  # anti-self-adjoint, so the sandwich is Hermitian
    rep = opcalc.sww_inequality_check(d, a, power, psd_tol=psd_tol)
    _finish(rep)


@main.group(name="complex")
def complex_group():
    """Finite Hilbert complex validation."""


@complex_group.command("check")
@click.option("--file", "file_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--dims", callback=_int_list_cb, default=None)
@click.option("--orders", callback=_int_list_cb, default=None)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def complex_check(file_path, dims, orders, seed):
    """Validate composition, gradings, and dimension bookkeeping."""
    if file_path is not None:
        try:
            c = complexes.complex_from_json(
                json.loads(Path(file_path).read_text()))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise click.UsageError(f"could not load complex: {exc}")
    else:
        if dims is None or orders is None:
            raise click.UsageError("give either --file or both --dims and --orders")
        try:
            c = complexes.random_complex(np.random.default_rng(seed), dims, orders)
        except ValueError as exc:
            raise click.UsageError(str(exc))
    _finish(complexes.validate(c))


@main.group(name="nilpotent")
def nilpotent_group():
    """Graded nilpotent lattice diagnostics."""


@nilpotent_group.command("weights")
@click.option("--radii", callback=_int_list_cb, default="5,10,20,40",
              show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
@click.option("--slope-tol", default=None, type=float)
def nilpotent_weights(radii, seed, slope_tol):
    """Translation-defect bound on lattice balls plus the counting exponent."""
    cfg = _flag_config("heisenberg-weights", ladder=radii, seed=seed,
                       slope_tol=slope_tol)
    _finish(EXPERIMENTS["heisenberg-weights"].runner(cfg).report)


@nilpotent_group.command("dilation")
@click.option("--samples", default=200, show_default=True)
@click.option("--tau", default=1.0, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def nilpotent_dilation(samples, tau, seed):
    """Dilation equivariance of layer functionals and assembled symbols."""
    cfg = _flag_config("carnot-dilation", seed=seed, samples=samples, tau=tau)
    _finish(EXPERIMENTS["carnot-dilation"].runner(cfg).report)


@main.group(name="dynamics")
def dynamics_group():
    """Torus, crossed-product, and Moebius dynamics diagnostics."""


@dynamics_group.command("shear")
@click.option("--sizes", callback=_int_list_cb, default="8,16,32,64",
              show_default=True)
@click.option("--mode", callback=_int_list_cb, default="0,1", show_default=True)
@click.option("--slope-tol", default=None, type=float)
def dynamics_shear(sizes, mode, slope_tol):
    """Crossed-product commutator ladder for the integer shear action."""
    cfg = _flag_config("shear-torus", ladder=sizes, slope_tol=slope_tol,
                       mode=list(mode))
    _finish(EXPERIMENTS["shear-torus"].runner(cfg).report)


@dynamics_group.command("nctorus")
@click.option("--cutoff", default=8, show_default=True)
@click.option("--orders", callback=_int_list_cb, default="1,2,4,8,16",
              show_default=True)
@click.option("--theta", default=0.375, show_default=True)
def dynamics_nctorus(cutoff, orders, theta):
    """Closed-form orbit commutator norms against dense truncations."""
    cfg = _flag_config("nctorus", ladder=orders, cutoff=cutoff, theta=theta)
    _finish(EXPERIMENTS["nctorus"].runner(cfg).report)


@dynamics_group.command("mobius")
@click.option("--orders", callback=_int_list_cb, default="1,2,3",
              show_default=True)
@click.option("--grid", default=250, show_default=True)
def dynamics_mobius(orders, grid):
    """Jacobian suprema of sphere Moebius maps, closed form vs grid search."""
    cfg = _flag_config("mobius", ladder=orders, grid=grid)
    _finish(EXPERIMENTS["mobius"].runner(cfg).report)


@main.group(name="interp")
def interp_group():
    """Interpolation-region scans."""


@interp_group.command("region")
@click.option("--dim", default=40, show_default=True)
@click.option("--grid", default=12, show_default=True)
@click.option("--instances", default=1, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def interp_region(dim, grid, instances, seed):
    """Hadamard three-line scan over a paired (alpha, beta) grid."""
    cfg = _flag_config("interp-region", seed=seed, dim=dim, grid=grid,
                       instances=instances)
    _finish(EXPERIMENTS["interp-region"].runner(cfg).report)


@main.group(name="rumin")
def rumin_group():
    """Character symbols and oscillator Rumin blocks."""


@rumin_group.command("oscillator")
@click.option("--n", default=64, show_default=True)
@click.option("--lam", default=1.0, show_default=True)
@click.option("--padding", default=8, show_default=True)
def rumin_oscillator(n, lam, padding):
    """Rockland check of the symbol complex on an oscillator truncation."""
    try:
        tr = symbols.oscillator_truncation(n, lam, padding)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    rep = symbols.rockland_check(tr)
    r1, r2 = symbols.composition_residuals(tr)
    rep.add_check("composition", max(r1, r2) <= 1e-10, value=max(r1, r2),
                  threshold=1e-10)
    _finish(rep)


@rumin_group.command("characters")
@click.option("--samples", default=50, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def rumin_characters(samples, seed):
    """Spectral-projection identities of the character matrices."""
    rng = np.random.default_rng(seed)
    j = np.array([[0.0, -1.0], [1.0, 0.0]])
    eye = np.eye(2)

    def draw(scale):
        while True:
            v = rng.uniform(-scale, scale, 2)
            if np.hypot(*v) > 1e-2:
                return v

    worst_part = worst_orth = worst_conj = worst_ray = 0.0
    for _ in range(samples):
        xi = draw(3.0)
        f = symbols.character_matrix_F(xi)
        worst_part = max(worst_part, np.linalg.norm(f.e1 + f.e2 - eye, 2))
        worst_orth = max(worst_orth, np.linalg.norm(f.e1 @ f.e2, 2))
        worst_conj = max(worst_conj, np.linalg.norm(f.e2 - j @ f.e1 @ j.T, 2))
        v = draw(2.0)
        t = float(rng.uniform(0.2, 20.0))
        alpha = float(rng.uniform(-0.4, 0.4))
        got = symbols.a_alpha_norm(t * (j @ v), v, alpha)
        s = float(v @ v)
        p = alpha - 0.5
        want = t * s * max((1 + t * t * s) ** p, (1 + t ** 4 * s * s) ** p)
        worst_ray = max(worst_ray, abs(got - want) / want)
    rep = DiagnosticReport(
        title="character matrix identities",
        anchor="F(xi) = |xi|^2 e1 + |xi|^4 e2; A_alpha closed form on xi = t J v",
    )
    rep.add_check("partition-of-identity", worst_part <= 1e-12,
                  value=worst_part, threshold=1e-12)
    rep.add_check("projector-orthogonality", worst_orth <= 1e-12,
                  value=worst_orth, threshold=1e-12)
    rep.add_check("rotation-conjugation", worst_conj <= 1e-12,
                  value=worst_conj, threshold=1e-12)
    rep.add_check("ray-closed-form", worst_ray <= 1e-9,
                  value=worst_ray, threshold=1e-9)
    _finish(rep)


@rumin_group.command("naive-demo")
@click.option("--alpha", type=float, required=True)
@click.option("--out", "outdir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--points", default=25, show_default=True)
@click.option("--ladder", callback=_int_list_cb, default=None,
              help="disk radii for the rolled-up supremum ladder")
def rumin_naive_demo(alpha, outdir, points, ladder):
    """Ray profile of the obstruction symbol: slope 2*alpha, bounded iff
    alpha <= 0."""
    grid = np.geomspace(10.0, 1.0e4, points)
    try:
        prof = symbols.ray_profile((1.0, 0.0), alpha, grid)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    base = out / f"naive-demo-alpha{alpha:g}"
    rows = list(zip(prof["t_grid"], prof["norms"]))
    write_csv(Path(f"{base}.csv"), ["t", "norm"], rows)
    _render_series(Path(f"{base}.png"), ["t", "norm"], rows)
    click.echo(f"wrote {base}.csv")
    slope = prof["fit"]["slope"]
    click.echo(f"ray slope {slope:.6f} (expected {max(2 * alpha, 0.0):g})")
    if ladder is not None:
        try:
            rep = symbols.naive_rollup_demo(radii=tuple(ladder), alphas=(alpha,))
        except ValueError as exc:
            raise click.UsageError(str(exc))
        _finish(rep)
    raise SystemExit(0)


@main.group(name="report")
def report_group():
    """Config-driven experiment reports."""


@report_group.command("list")
def report_list():
    """Names and anchors of all registered experiments."""
    width = max(len(n) for n in EXPERIMENTS)
    for name, anchor in list_experiments().items():
        click.echo(f"{name:<{width}}  {anchor}")


@report_group.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out", "outdir", type=click.Path(file_okay=False), default=None,
              help="override the config output directory")
def report_run(config_path, seed, outdir):
    """Run one experiment from a `key = JSON` config file."""
    try:
        mapping = parse_config(Path(config_path).read_text())
        cfg = experiment_config(mapping, seed=seed, outdir=outdir)
        result = execute(cfg)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    path = write_outputs(cfg, result)
    _echo_report(result.report)
    click.echo(f"report: {path}")
    raise SystemExit(0 if result.report.passed else 1)
