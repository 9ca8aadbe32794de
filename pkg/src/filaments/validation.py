"""Validation suites and the experiments behind them.

Every suite returns a JSON-ready report with a list of checks, each
carrying the measured value, its tolerance and a pass flag, plus optional
``tables`` (plot-ready columns) that the CLI writes as CSV files.
"""

from __future__ import annotations

import logging
import math
import time

import numpy as np
from scipy import stats

from .errors import InvalidInputError
from .geometry import distances_to_set, hausdorff
from .kernel_density import DensityModel
from .ridge import ScmsConfig, _batch_spectrum, estimate_ridge
from .rng import DEFAULT_SEED, stream
from .synthetic import make_points
from .theory import (AnalyticDensity, asymptotic_mu_sigma, asymptotic_rho2, axis_gaussian, banana,
                     circle_mixture, clt_gradient_check, gaussian_1d, mode_condition_suite, monte_carlo_rho2)
from .uncertainty import bootstrap_ridges, coverage_experiment, local_uncertainty

log = logging.getLogger(__name__)

SUITES = ("derivatives", "spectral", "lemma3", "clt", "rates", "coverage")


def check(name: str, value, tolerance: str, passed: bool, **extra) -> dict:
    return {"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed), **extra}


def _report(suite: str, checks: list[dict], **extra) -> dict:
    return {"suite": suite, "passed": all(c["passed"] for c in checks), "checks": checks, **extra}


# -- derivatives -------------------------------------------------------------


def fd_relative_error(evaluate, points: np.ndarray, order: int, step: float = 1e-4) -> float:
    """max |central difference of order-1 tensor - order tensor| / max |order tensor|."""
    d = points.shape[1]
    exact = np.asarray(evaluate(points, order))
    fd = np.empty_like(exact)
    for k in range(d):
        e = np.zeros(d)
        e[k] = step
        diff = (np.asarray(evaluate(points + e, order - 1)) - np.asarray(evaluate(points - e, order - 1))) / (2 * step)
        # derivative direction becomes the last tensor index
        fd[(Ellipsis,) + (k,)] = diff
    return float(np.abs(fd - exact).max() / np.abs(exact).max())


def random_mixture(d: int, k: int, rng: np.random.Generator) -> AnalyticDensity:
    w = rng.uniform(0.5, 1.5, k)
    means = rng.normal(0.0, 1.0, (k, d))
    covs = []
    for _ in range(k):
        A = rng.normal(0.0, 0.5, (d, d))
        covs.append(A @ A.T + 0.3 * np.eye(d))
    return AnalyticDensity(w / w.sum(), means, np.array(covs))


def suite_derivatives(seed: int = DEFAULT_SEED, points: int = 100, kde_tol: float = 1e-5,
                      analytic_tol: float = 1e-6) -> dict:
    rng = stream(seed, "derivatives")
    X = rng.normal(0.0, 1.0, (300, 2))
    model = DensityModel(X, 0.5)
    Q = rng.uniform(X.min(axis=0), X.max(axis=0), (points, 2))
    checks = []
    for j in (1, 2, 3):
        err = fd_relative_error(model.evaluate, Q, j)
        checks.append(check(f"kde_order_{j}", err, f"< {kde_tol:g}", err < kde_tol))
    mix = random_mixture(2, 3, rng)
    Qm = rng.uniform(mix.means.min(axis=0) - 1, mix.means.max(axis=0) + 1, (points, 2))
    for j in (1, 2, 3, 4):
        err = fd_relative_error(mix.evaluate, Qm, j)
        checks.append(check(f"analytic_order_{j}", err, f"< {analytic_tol:g}", err < analytic_tol))
    worst_kde = max(c["value"] for c in checks if c["name"].startswith("kde"))
    return _report("derivatives", checks, max_rel_err_kde=worst_kde,
                   max_rel_err_analytic=max(c["value"] for c in checks if c["name"].startswith("analytic")))


# -- spectral / ridge validity -----------------------------------------------


def recheck_ridge(R, data) -> dict:
    """Recompute G, lambda_2 and the eigengap at every point from the direct KDE."""
    if len(R) == 0:
        return {"points": 0, "max_grad_norm": math.nan, "max_lambda2": math.nan, "min_eigengap": math.nan}
    Xw = (np.asarray(data, dtype=float) - R.frame_center) / R.frame_scale
    model = DensityModel(Xw, R.h / R.frame_scale)
    Z = R.working_points()
    g = model.evaluate(Z, 1)
    H = model.evaluate(Z, 2)
    w, v = _batch_spectrum(H)
    V = v[:, :, 1:]
    G = np.einsum("mij,mj->mi", V, np.einsum("mji,mj->mi", V, g))
    return {
        "points": len(R),
        "max_grad_norm": float(np.linalg.norm(G, axis=1).max()),
        "max_lambda2": float(w[:, 1].max()),
        "min_eigengap": float((w[:, 0] - w[:, 1]).min()),
    }


def ridge_validity(kind: str, n: int, noise: float, seed: int, config: ScmsConfig | None = None) -> dict:
    cfg = config or ScmsConfig()
    X = make_points(kind, n, noise, seed)
    t0 = time.perf_counter()
    R = estimate_ridge(X, cfg, rng_seed=seed)
    out = recheck_ridge(R, X)
    out.update(
        kind=kind, n=n, noise=noise, seconds=time.perf_counter() - t0, tol_G=cfg.tol_G,
        frac_grad_ok=float(np.mean(R.grad_norm <= cfg.tol_G)) if len(R) else 0.0,
        frac_lambda2_neg=float(np.mean(R.lambda2 < 0)) if len(R) else 0.0,
        frac_gap_pos=float(np.mean(R.eigengap > 0)) if len(R) else 0.0,
        rejected=R.rejected,
    )
    return out


def suite_spectral(seed: int = DEFAULT_SEED, n: int = 2000, noise: float = 0.1) -> dict:
    checks = []
    results = {}
    for kind in ("circle", "banana"):
        r = ridge_validity(kind, n, noise, seed)
        results[kind] = r
        ok = r["points"] > 0 and r["frac_grad_ok"] == 1 and r["frac_lambda2_neg"] == 1 and r["frac_gap_pos"] == 1
        checks.append(check(f"{kind}_all_points_valid", [r["frac_grad_ok"], r["frac_lambda2_neg"], r["frac_gap_pos"]],
                            "fractions == 1", ok, points=r["points"]))
        re_ok = r["max_grad_norm"] <= r["tol_G"] * (1 + 1e-6) + 1e-13 and r["max_lambda2"] < 0 and r["min_eigengap"] > 0
        checks.append(check(f"{kind}_recheck", [r["max_grad_norm"], r["max_lambda2"], r["min_eigengap"]],
                            "|G| <= tol_G, lambda2 < 0, gap > 0 (direct KDE)", re_ok))
    return _report("spectral", checks, results=results)


# -- constrained-mode conditions ---------------------------------------------


def suite_mode_conditions(seed: int = DEFAULT_SEED, cases: int = 1000) -> dict:
    res = mode_condition_suite(cases, (2, 3), seed)
    checks = [
        check("sufficient_implies_necessary", res["sufficient_not_necessary"], "== 0", res["sufficient_not_necessary"] == 0),
        check("necessary_implies_negative_definite", res["necessary_not_nd"], "== 0", res["necessary_not_nd"] == 0),
        check("sufficient_implies_negative_definite", res["sufficient_not_nd"], "== 0", res["sufficient_not_nd"] == 0),
        check("negative_definite_implies_necessary", res["nd_not_necessary"], "== 0", res["nd_not_necessary"] == 0),
    ]
    violations = res["sufficient_not_necessary"] + res["necessary_not_nd"]
    return _report("lemma3", checks, cases=res["cases"], violations=violations, counts=res)


# -- CLT ---------------------------------------------------------------------


def suite_clt(seed: int = DEFAULT_SEED, n: int = 4000, repetitions: int = 2000, x: float = 0.0,
              bias_point: float = 1.0) -> dict:
    truth = gaussian_1d()
    h = n ** (-1.0 / 7.0)
    rep = clt_gradient_check(truth, [x], n, h, repetitions, seed)
    ratio = float(rep.variance_ratio[0])
    z_mean = float(rep.mean[0] / rep.mean_se[0])
    checks = [
        check("variance_ratio", ratio, "within [0.75, 1.25]", 0.75 <= ratio <= 1.25,
              empirical=float(rep.covariance[0, 0]), predicted=float(rep.predicted[0, 0])),
        check("mean_at_mode_z", z_mean, "|z| < 3", abs(z_mean) < 3),
    ]
    big = clt_gradient_check(truth, [bias_point], n, 0.4, repetitions // 2, seed + 1)
    small = clt_gradient_check(truth, [bias_point], n, 0.2, repetitions // 2, seed + 2)
    b_big, b_small = abs(float(big.raw_mean[0])), abs(float(small.raw_mean[0]))
    checks.append(check("bias_halving_h", b_big / b_small, ">= 2", b_big >= 2 * b_small,
                        bias_h_0_4=b_big, bias_h_0_2=b_small,
                        predicted_h_0_4=float(big.bias_term[0]), predicted_h_0_2=float(small.bias_term[0])))
    return _report("clt", checks, h=h, skewness=float(rep.skewness[0]), excess_kurtosis=float(rep.excess_kurtosis[0]),
                   tables={"clt_statistic": {"z": rep.statistic[:, 0]}})


# -- rates -------------------------------------------------------------------


def rate_experiment(sizes=(1000, 2000, 4000), repetitions: int = 100, h: float = 0.5, anchors: int = 21,
                    seed: int = DEFAULT_SEED, config: ScmsConfig | None = None) -> dict:
    """Monte-Carlo rho^2 on the axis-aligned Gaussian at fixed h, with predictions."""
    truth = axis_gaussian()
    A = truth.ridge.subsample(anchors)
    prof = asymptotic_mu_sigma(truth, A.points, A.normals)
    rows = []
    for n in sizes:
        mc = monte_carlo_rho2(truth, A.points, n, repetitions, config, bandwidth=h, seed=seed)
        rows.append({
            "n": n, "rho2_mc": float(mc.rho2.mean()), "se": float(mc.sq_distances.mean(axis=1).std(ddof=1) / math.sqrt(mc.repetitions)),
            "pred_trace_sigma": float(asymptotic_rho2(prof, n, h, 1).mean()),
            "pred_trace_sigma2": float(asymptotic_rho2(prof, n, h, 2).mean()),
            "dropped": len(mc.dropped),
        })
    ln = np.log([r["n"] for r in rows])
    slope = float(np.polyfit(ln, np.log([r["rho2_mc"] for r in rows]), 1)[0])
    dev1 = float(np.mean([abs(math.log(r["rho2_mc"] / r["pred_trace_sigma"])) for r in rows]))
    dev2 = float(np.mean([abs(math.log(r["rho2_mc"] / r["pred_trace_sigma2"])) for r in rows]))
    return {"rows": rows, "slope": slope, "h": h, "mu_max": float(np.abs(prof.mu).max()),
            "trace_comparison": {"mean_abs_log_ratio_trace_sigma": dev1, "mean_abs_log_ratio_trace_sigma2": dev2,
                                 "closer": "trace_sigma" if dev1 < dev2 else "trace_sigma2"}}


def suite_rates(seed: int = DEFAULT_SEED, repetitions: int = 100) -> dict:
    res = rate_experiment(repetitions=repetitions, seed=seed)
    checks = [check("log_log_slope", res["slope"], "-1 +/- 0.3", abs(res["slope"] + 1) <= 0.3)]
    table = {k: [r[k] for r in res["rows"]] for k in ("n", "rho2_mc", "pred_trace_sigma", "pred_trace_sigma2")}
    table["log_n"] = np.log(table["n"])
    table["log_rho2_mc"] = np.log(table["rho2_mc"])
    return _report("rates", checks, results=res, tables={"rates": table})


# -- coverage ----------------------------------------------------------------


def suite_coverage(seed: int = DEFAULT_SEED, repetitions: int = 200, B: int = 100, alpha: float = 0.1,
                   n: int = 2000, mode: str = "smooth", seeding: str = "base", threshold: float = 0.80) -> dict:
    if repetitions < 1:
        raise InvalidInputError("coverage suite needs repetitions >= 1")
    truth = circle_mixture()
    rep = coverage_experiment(truth, n, B, [alpha], repetitions, mode, seed=seed, seeding=seeding)
    cov = rep.interior_mean(alpha)
    checks = [check("interior_mean_coverage", cov, f">= {threshold}", cov >= threshold)]
    angle = np.arctan2(rep.anchors[:, 1], rep.anchors[:, 0])
    return _report("coverage", checks, results=rep.to_dict(),
                   tables={"coverage": {"angle": angle, "coverage": rep.per_anchor[0]}})


# -- experiments used by the acceptance suite --------------------------------


def consistency_experiment(sizes=(250, 1000, 4000), seeds: int = 10, noise: float = 0.1,
                           seed: int = DEFAULT_SEED, config: ScmsConfig | None = None) -> dict:
    """Median Hausdorff distance between the ridge estimate and the true circle ridge."""
    truth = circle_mixture(sigma=noise)
    out = {}
    for n in sizes:
        vals = []
        for s in range(seeds):
            X = truth.sample(n, stream(seed, "consistency", n, s))
            R = estimate_ridge(X, config)
            vals.append(hausdorff(R.points, truth.ridge.points) if len(R) else math.inf)
        out[n] = {"median": float(np.median(vals)), "values": vals}
    return out


def bootstrap_vs_monte_carlo(n: int = 2000, B: int = 100, repetitions: int = 200, modulation: float = 0.6,
                             anchors: int = 60, seed: int = DEFAULT_SEED, seeding: str = "grid") -> dict:
    """Smooth-bootstrap rho^2 on one dataset against the Monte-Carlo oracle.

    Each true anchor is paired with the base ridge point nearest to it.
    """
    truth = circle_mixture(modulation=modulation)
    A = truth.ridge.subsample(anchors)
    mc = monte_carlo_rho2(truth, A.points, n, repetitions, seed=seed)
    X = truth.sample(n, stream(seed, "bootstrap-data"))
    base = estimate_ridge(X)
    ens = bootstrap_ridges(X, base, B, "smooth", seed=seed, seeding=seeding)
    fld = local_uncertainty(base, ens)
    diff = A.points[:, None, :] - base.points[None]
    nearest = np.argmin(np.einsum("mni,mni->mn", diff, diff), axis=1)
    boot = fld.rho2[nearest]
    rel = np.abs(boot - mc.rho2) / mc.rho2
    rho = float(stats.spearmanr(boot, mc.rho2).statistic)
    return {"median_rel_dev": float(np.median(rel)), "spearman": rho, "rho2_boot": boot, "rho2_mc": mc.rho2,
            "angle": np.arctan2(A.points[:, 1], A.points[:, 0]), "B_effective": ens.B, "mc_kept": mc.repetitions}


def _group_means(rho2: np.ndarray, groups: dict[str, np.ndarray]) -> dict[str, float]:
    return {k: float(rho2[m].mean()) if m.any() else math.nan for k, m in groups.items()}


def uncertainty_geography(kind: str, seeds: int = 10, n: int = 2000, B: int = 100, seed: int = DEFAULT_SEED,
                          seeding: str = "base") -> dict:
    """Per-seed mean rho^2-hat in two anchor groups, plus their medians over seeds.

    kind = "cross":   within 2h of the crossing vs the straight arms.
    kind = "arc":     within 2h (arc length) of either end vs the interior.
    kind = "banana":  apex (|x| < 0.2) vs flanks (0.4 < |x| < 0.7).
    """
    per_seed = []
    arc_density = circle_mixture(arc=(0.0, 1.5 * np.pi), ridge_points=10) if kind == "arc" else None
    for s in range(seeds):
        if kind == "cross":
            X = make_points("cross", n, 0.1, seed + s)
        elif kind == "banana":
            X = make_points("banana", n, 0.1, seed + s)
        elif kind == "arc":
            X = arc_density.sample(n, stream(seed, "arc", s))
        else:
            raise InvalidInputError(f"unknown geography fixture {kind!r}")
        base = estimate_ridge(X)
        ens = bootstrap_ridges(X, base, B, "smooth", seed=seed, seeding=seeding, scope=(s,))
        fld = local_uncertainty(base, ens)
        P, h = base.points, base.h
        if kind == "cross":
            r = np.linalg.norm(P, axis=1)
            off_axis = np.min(np.abs(P), axis=1)
            groups = {"focus": r <= 2 * h, "rest": (r > 3 * h) & (r < 1 - 2 * h) & (off_axis < 2 * h)}
        elif kind == "arc":
            ang = np.mod(np.arctan2(P[:, 1], P[:, 0]), 2 * np.pi)
            ang = np.where(ang > 1.75 * np.pi, ang - 2 * np.pi, ang)
            lo, hi = ang.min(), ang.max()
            arclen = np.minimum(ang - lo, hi - ang)
            groups = {"focus": arclen <= 2 * h, "rest": arclen > 4 * h}
        else:
            ax = np.abs(P[:, 0])
            groups = {"focus": ax < 0.2, "rest": (ax > 0.4) & (ax < 0.7)}
        means = _group_means(fld.rho2, groups)
        means.update(h=h, n_focus=int(groups["focus"].sum()), n_rest=int(groups["rest"].sum()))
        per_seed.append(means)
    med = {k: float(np.nanmedian([m[k] for m in per_seed])) for k in ("focus", "rest")}
    return {"kind": kind, "per_seed": per_seed, "median_focus": med["focus"], "median_rest": med["rest"]}


def run_suite(name: str, seed: int = DEFAULT_SEED, repetitions: int | None = None, B: int = 100,
              alpha: float = 0.1) -> dict:
    if name not in SUITES:
        raise InvalidInputError(f"unknown suite {name!r}; available suites: {', '.join(SUITES)}")
    if name == "derivatives":
        return suite_derivatives(seed)
    if name == "spectral":
        return suite_spectral(seed)
    if name == "lemma3":
        return suite_mode_conditions(seed)
    if name == "clt":
        return suite_clt(seed, repetitions=2000 if repetitions is None else repetitions)
    if name == "rates":
        return suite_rates(seed, repetitions=100 if repetitions is None else repetitions)
    return suite_coverage(seed, repetitions=200 if repetitions is None else repetitions, B=B, alpha=alpha)
