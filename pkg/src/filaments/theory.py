"""Analytic mixture densities, oracle ridges and asymptotic ridge-error quantities."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._hermite import MAX_ORDER, hermite_sum
from .errors import EigengapDegenerateError, InvalidInputError, SingularHessianError, NumericalFailure
from .geometry import distances_to_set
from .kernel_density import DensityModel, KernelProfile
from .ridge import ScmsConfig, estimate_ridge, local_spectrum, resolve_bandwidth
from .rng import DEFAULT_SEED, stream

log = logging.getLogger(__name__)

_BLOCK = 1 << 16  # query x component pairs per evaluation block


@dataclass(frozen=True)
class KnownRidge:
    """Discretized true ridge: ordered points, arc length and normal bases."""

    points: np.ndarray          # (m, d)
    normals: np.ndarray         # (m, d, d-1), orthonormal columns
    closed: bool = False
    s: np.ndarray = field(default=None)

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "normals", np.asarray(self.normals, dtype=float))
        if self.s is None:
            seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
            object.__setattr__(self, "s", np.concatenate([[0.0], np.cumsum(seg)]))

    @property
    def length(self) -> float:
        L = float(self.s[-1])
        if self.closed:
            L += float(np.linalg.norm(self.points[0] - self.points[-1]))
        return L

    def __len__(self) -> int:
        return self.points.shape[0]

    def boundary_distance(self) -> np.ndarray:
        """Arc-length distance of each point to the nearest end (inf if closed)."""
        if self.closed:
            return np.full(len(self), np.inf)
        return np.minimum(self.s, self.s[-1] - self.s)

    def subsample(self, count: int) -> "KnownRidge":
        """``count`` points evenly spread in arc length."""
        count = int(count)
        if count >= len(self):
            return self
        if self.closed:
            targets = np.arange(count) * self.length / count
        else:
            targets = np.linspace(0.0, self.s[-1], count)
        idx = np.unique(np.clip(np.searchsorted(self.s, targets), 0, len(self) - 1))
        return KnownRidge(self.points[idx], self.normals[idx], self.closed, self.s[idx])


@dataclass(frozen=True)
class AnalyticDensity:
    """Gaussian mixture sum_k w_k N(mu_k, Sigma_k) with closed-form derivatives."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    ridge: KnownRidge | None = field(default=None, compare=False)
    name: str = "mixture"

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        S = np.asarray(self.covs, dtype=float)
        if S.ndim == 2:
            S = np.broadcast_to(S, (mu.shape[0],) + S.shape).copy()
        if w.shape[0] != mu.shape[0] or S.shape != (mu.shape[0], mu.shape[1], mu.shape[1]):
            raise InvalidInputError("weights, means and covariances disagree in shape")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInputError("mixture weights must be positive and sum to 1")
        if not np.allclose(S, np.swapaxes(S, 1, 2)):
            raise InvalidInputError("covariances must be symmetric")
        try:
            chol = np.linalg.cholesky(S)
        except np.linalg.LinAlgError as exc:
            raise InvalidInputError("covariances must be positive definite") from exc
        P = np.linalg.inv(S)
        P = 0.5 * (P + np.swapaxes(P, 1, 2))
        shared = bool(np.all(S == S[:1]))
        d = mu.shape[1]
        logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        coef = w * np.exp(-0.5 * (d * math.log(2 * math.pi) + logdet))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", S)
        object.__setattr__(self, "_P", P[0] if shared else P)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_coef", coef)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def k(self) -> int:
        return self.means.shape[0]

    def evaluate(self, x, order: int = 0) -> np.ndarray:
        """p, grad p, Hessian, or the order-3/4 derivative tensor at ``x``."""
        if order not in range(MAX_ORDER + 1):
            raise InvalidInputError(f"derivative order must be in 0..{MAX_ORDER}, got {order}")
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        Q = np.atleast_2d(x)
        if Q.shape[1] != self.d:
            raise InvalidInputError("query dimension does not match density")
        out = np.empty((Q.shape[0],) + (self.d,) * order)
        step = max(1, _BLOCK // (self.k * max(1, self.d ** order)))
        for s in range(0, Q.shape[0], step):
            diff = Q[s:s + step, None, :] - self.means[None]
            if self._P.ndim == 2:
                y = diff @ self._P
            else:
                y = np.einsum("kij,mkj->mki", self._P, diff)
            w = self._coef * np.exp(-0.5 * np.einsum("mki,mki->mk", diff, y))
            out[s:s + step] = hermite_sum(w, y, self._P, order)
        return out[0] if single else out

    def density(self, x):
        return self.evaluate(x, 0)

    def gradient(self, x):
        return self.evaluate(x, 1)

    def hessian(self, x):
        return self.evaluate(x, 2)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Component labels first, then one Gaussian draw per point."""
        labels = rng.choice(self.k, size=int(n), p=self.weights)
        z = rng.standard_normal((int(n), self.d))
        return self.means[labels] + np.einsum("nij,nj->ni", self._chol[labels], z)


def analytic_eval(density: AnalyticDensity, x, order: int = 0):
    return density.evaluate(x, order)


# ---------------------------------------------------------------------------
# oracle ridge finding (independent of SCMS)


def _ridge_residual(density: AnalyticDensity, x: np.ndarray):
    g = density.gradient(x)
    H = density.hessian(x)
    sp = local_spectrum(g, H)
    return sp, np.linalg.norm(sp.projected_gradient)


def polish_ridge_point(density: AnalyticDensity, x, tol: float = 1e-10, max_iter: int = 100):
    """Projected Newton on V^T grad p = 0 within span(V).

    Returns (point, ||G||, converged).  Each step solves the linearization
    V^T H V t = -V^T g, which is diagonal in the eigenbasis.
    """
    x = np.array(x, dtype=float)
    sp, gn = _ridge_residual(density, x)
    for _ in range(max_iter):
        if gn <= tol:
            return x, gn, True
        V = sp.V
        lam = sp.eigenvalues[1:]
        if np.any(lam >= 0):
            return x, gn, False
        t = -(V.T @ sp.gradient) / lam
        # damp steps that would leave the neighbourhood (flat directions)
        scale = 1.0
        for _ in range(30):
            x_new = x + scale * (V @ t)
            sp_new, gn_new = _ridge_residual(density, x_new)
            if gn_new < gn or scale < 1e-6:
                break
            scale *= 0.5
        x, sp, gn = x_new, sp_new, gn_new
    return x, gn, gn <= tol


def is_oracle_ridge(density: AnalyticDensity, x, tau: float, pmax: float) -> bool:
    """lambda_2 < 0, density above tau * pmax, and well inside the log-concave band."""
    g = density.gradient(x)
    sp = local_spectrum(g, density.hessian(x))
    p = float(density.density(x))
    return bool(sp.lambda2 < 0 and sp.eigengap > 0 and p >= tau * pmax and sp.eigengap > g @ g / p)


def oracle_ridge_points(density: AnalyticDensity, bounds, counts, tau: float = 0.1,
                        tol: float = 1e-10, merge: float | None = None) -> np.ndarray:
    """Dense-grid search plus projected-Newton polish for true ridge points."""
    from .ridge import seed_grid

    grid = seed_grid(bounds, counts)
    p = density.density(grid)
    pmax = p.max()
    cand = grid[p >= tau * pmax]
    out = []
    for x0 in cand:
        x, gn, ok = polish_ridge_point(density, x0, tol)
        if ok and is_oracle_ridge(density, x, tau, pmax):
            out.append(x)
    if not out:
        return np.empty((0, density.d))
    pts = np.array(out)
    if merge is None:
        b = np.asarray(bounds, dtype=float)
        merge = 0.25 * float(np.min((b[:, 1] - b[:, 0]) / (np.asarray(counts) - 1)))
    keep = []
    for i in range(pts.shape[0]):
        if not keep or np.min(np.linalg.norm(pts[keep] - pts[i], axis=1)) > merge:
            keep.append(i)
    return pts[keep]


def _normals_from_hessian(density: AnalyticDensity, P: np.ndarray) -> np.ndarray:
    """Normal-space basis at each ridge point: the d-1 trailing Hessian eigenvectors."""
    g = density.gradient(P)
    H = density.hessian(P)
    return np.array([local_spectrum(gi, Hi).V for gi, Hi in zip(g, H)])


# ---------------------------------------------------------------------------
# stock densities


def axis_gaussian(variances=(4.0, 1.0), half_length: float = 2.0, m: int = 201) -> AnalyticDensity:
    """N(0, diag(variances)); the ridge is the first coordinate axis.

    The recorded ridge covers |x_1| <= half_length (the axis itself is
    unbounded)."""
    v = np.asarray(variances, dtype=float)
    d = v.shape[0]
    if np.any(np.diff(v) >= 0):
        raise InvalidInputError("variances must be strictly decreasing for a unique ridge axis")
    t = np.linspace(-half_length, half_length, m)
    P = np.zeros((m, d))
    P[:, 0] = t
    normals = np.broadcast_to(np.eye(d)[:, 1:], (m, d, d - 1)).copy()
    ridge = KnownRidge(P, normals, closed=False)
    return AnalyticDensity(np.ones(1), np.zeros((1, d)), np.diag(v)[None], ridge=ridge, name="axis-gaussian")


def _circle_components(radius, sigma, components, modulation):
    th = 2 * np.pi * np.arange(components) / components
    w = 1.0 + modulation * np.cos(th)
    if np.any(w <= 0):
        raise InvalidInputError("modulation must keep weights positive (|a| < 1)")
    w = w / w.sum()
    mu = radius * np.c_[np.cos(th), np.sin(th)]
    return w, mu, sigma ** 2 * np.eye(2)


def circle_mixture(radius: float = 1.0, sigma: float = 0.1, components: int = 720,
                   modulation: float = 0.0, ridge_points: int = 720,
                   arc: tuple[float, float] | None = None) -> AnalyticDensity:
    """Gaussian noise around a circle (or an arc) of the given radius.

    Weights follow 1 + modulation * cos(theta).  With ``arc=(t0, t1)`` the
    components cover only that angular range, giving an open ridge.
    """
    if arc is None:
        w, mu, S = _circle_components(radius, sigma, components, modulation)
        base = AnalyticDensity(w, mu, S, name="circle")
        # radial maximum of the density along theta = 0
        f = lambda r: base.gradient(np.array([r, 0.0]))[0]
        r0 = brentq(f, radius - 3 * sigma, radius + sigma)
        th = 2 * np.pi * np.arange(ridge_points) / ridge_points
        start = r0 * np.c_[np.cos(th), np.sin(th)]
        closed = True
    else:
        t0, t1 = arc
        th = np.linspace(t0, t1, components)
        wts = 1.0 + modulation * np.cos(th)
        w = wts / wts.sum()
        mu = radius * np.c_[np.cos(th), np.sin(th)]
        base = AnalyticDensity(w, mu, sigma ** 2 * np.eye(2), name="arc")
        tm = 0.5 * (t0 + t1)
        f = lambda r: base.gradient(r * np.array([np.cos(tm), np.sin(tm)])) @ np.array([np.cos(tm), np.sin(tm)])
        r0 = brentq(f, radius - 3 * sigma, radius + sigma)
        th = np.linspace(t0, t1, ridge_points)
        start = r0 * np.c_[np.cos(th), np.sin(th)]
        closed = False
    pts = []
    for x0 in start:
        x, gn, ok = polish_ridge_point(base, x0, 1e-10)
        if ok:
            pts.append(x)
    pts = np.array(pts)
    if arc is not None:
        pmax = base.density(pts).max()
        good = [i for i, x in enumerate(pts) if is_oracle_ridge(base, x, 0.1, pmax)]
        pts = pts[good]
    ridge = KnownRidge(pts, _normals_from_hessian(base, pts), closed=closed)
    return AnalyticDensity(base.weights, base.means, base.covs, ridge=ridge,
                           name="circle" if arc is None else "arc")


def banana(curvature: float = 1.0, half_width: float = 1.0, sigma: float = 0.12,
           components: int = 400, ridge_points: int = 301) -> AnalyticDensity:
    """Isotropic noise around the parabola y = curvature * x^2, uniform in arc length."""
    fine = np.linspace(-half_width, half_width, 20001)
    seg = np.hypot(np.diff(fine), curvature * np.diff(fine ** 2))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    xs = np.interp(np.linspace(0, s[-1], components), s, fine)
    mu = np.c_[xs, curvature * xs ** 2]
    base = AnalyticDensity(np.full(components, 1.0 / components), mu, sigma ** 2 * np.eye(2), name="banana")
    # start on the curve and polish; keep only the well-defined part
    ts = np.linspace(-half_width, half_width, ridge_points)
    pts = []
    for t in ts:
        x, gn, ok = polish_ridge_point(base, np.array([t, curvature * t * t]), 1e-10)
        if ok:
            pts.append(x)
    pts = np.array(pts)
    pmax = base.density(pts).max()
    good = np.array([is_oracle_ridge(base, x, 0.1, pmax) for x in pts])
    pts = pts[good]
    pts = pts[np.argsort(pts[:, 0])]
    ridge = KnownRidge(pts, _normals_from_hessian(base, pts), closed=False)
    return AnalyticDensity(base.weights, base.means, base.covs, ridge=ridge, name="banana")


# ---------------------------------------------------------------------------
# asymptotic quantities


def _check_basis(L: np.ndarray, d: int) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim == 1:
        L = L[:, None]
    if L.shape[0] != d:
        raise InvalidInputError("basis rows must match the dimension")
    if np.abs(L.T @ L - np.eye(L.shape[1])).max() > 1e-9:
        raise InvalidInputError("subspace basis must be orthonormal")
    return L


def subspace_quantities(density, x, L):
    """(L^T grad p, L^T H L) at ``x``."""
    x = np.asarray(x, dtype=float)
    L = _check_basis(L, x.shape[0])
    g = density.evaluate(x, 1)
    H = density.evaluate(x, 2)
    return L.T @ g, L.T @ H @ L


@dataclass
class AsymptoticProfile:
    anchors: np.ndarray          # (m, d)
    mu: np.ndarray               # (m, d-1)
    Sigma: np.ndarray            # (m, d-1, d-1)
    density: np.ndarray          # (m,)
    m2: float
    bias_constant: float
    grad_outer_integral: np.ndarray

    @property
    def d(self) -> int:
        return self.anchors.shape[1]


def asymptotic_mu_sigma(density, anchors, bases, kernel: KernelProfile | None = None,
                        ridge_tol: float = 1e-8) -> AsymptoticProfile:
    """Bias direction mu(s) and covariance Sigma(s) of the ridge error in L(s).

    mu = c(K) H_L^{-1} L^T grad(Laplacian p) and
    Sigma = H_L^{-1} L^T J L H_L^{-1} p, with J the integral of
    grad K grad K^T and c(K) = m2(K) / 2.
    """
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    Ls = np.asarray(bases, dtype=float)
    d = A.shape[1]
    if Ls.ndim == 2:
        Ls = np.broadcast_to(Ls, (A.shape[0],) + Ls.shape)
    kernel = kernel or KernelProfile(d)
    J = kernel.grad_outer_integral
    mus, sigmas, ps = [], [], []
    for x, L in zip(A, Ls):
        L = _check_basis(L, d)
        gL, HL = subspace_quantities(density, x, L)
        if np.linalg.norm(gL) > ridge_tol * max(1.0, float(np.abs(HL).max())):
            raise InvalidInputError(f"anchor {x} is not on the ridge (|g_L| = {np.linalg.norm(gL):.3g})")
        ev = np.linalg.eigvalsh(HL)
        if np.min(np.abs(ev)) <= 1e-12 * max(1.0, np.abs(ev).max()):
            raise SingularHessianError(f"subspace Hessian is singular at {x}")
        T = density.evaluate(x, 3)
        grad_lap = np.einsum("ijj->i", T)
        Hinv = np.linalg.inv(HL)
        p = float(density.evaluate(x, 0))
        mus.append(kernel.bias_constant * Hinv @ (L.T @ grad_lap))
        S = Hinv @ L.T @ J @ L @ Hinv * p
        sigmas.append(0.5 * (S + S.T))
        ps.append(p)
    return AsymptoticProfile(A, np.array(mus), np.array(sigmas), np.array(ps),
                             kernel.m2, kernel.bias_constant, J)


def asymptotic_rho2(profile: AsymptoticProfile, n: int, h: float, trace_power: int = 2) -> np.ndarray:
    """mu^T mu h^4 + Trace(Sigma^k) / (n h^(d+2)), with k = ``trace_power`` (1 or 2)."""
    if n < 1 or not h > 0:
        raise InvalidInputError("need n >= 1 and h > 0")
    if trace_power not in (1, 2):
        raise InvalidInputError("trace_power must be 1 or 2")
    bias = np.einsum("mi,mi->m", profile.mu, profile.mu) * h ** 4
    S = profile.Sigma if trace_power == 1 else profile.Sigma @ profile.Sigma
    var = np.trace(S, axis1=1, axis2=2) / (n * h ** (profile.d + 2))
    return bias + var


# ---------------------------------------------------------------------------
# constrained-mode conditions


@dataclass(frozen=True)
class ModeConditions:
    necessary_holds: bool
    sufficient_holds: bool
    diagonal: np.ndarray        # sum_i lambda_i (v_i^T e_j)^2, j = 2..d
    alignment: float            # (v_1^T e_1)^2
    threshold: float            # lambda_1 / (lambda_1 - lambda_2)


def constrained_mode_check(eigenvalues, eigenvectors, basis) -> ModeConditions:
    """Evaluate the diagonal (necessary) and alignment (sufficient) conditions.

    ``eigenvalues`` descending with eigenvectors as columns; ``basis`` is a
    d x d orthonormal matrix whose first column is the curve direction e_1
    and whose remaining columns span the constraint subspace.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    V = np.asarray(eigenvectors, dtype=float)
    E = np.asarray(basis, dtype=float)
    d = lam.shape[0]
    if V.shape != (d, d) or E.shape != (d, d):
        raise InvalidInputError("eigenvectors and basis must be d x d")
    if np.any(np.diff(lam) > 0):
        raise InvalidInputError("eigenvalues must be sorted in descending order")
    if lam[0] - lam[1] <= 1e-14 * max(1.0, np.abs(lam).max()):
        raise EigengapDegenerateError("lambda_1 == lambda_2; the conditions are undefined")
    C = (V.T @ E) ** 2                      # C[i, j] = (v_i^T e_j)^2
    diag = lam @ C[:, 1:]
    align = float(C[0, 0])
    thr = float(lam[0] / (lam[0] - lam[1]))
    return ModeConditions(bool(np.all(diag < 0)), bool(align > thr), diag, align, thr)


def _haar_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def mode_condition_instances(cases: int = 1000, dims=(2, 3), seed: int = DEFAULT_SEED):
    """Random (eigenvalues, eigenvectors, basis) triples with lambda_1 > lambda_2 < 0."""
    rng = stream(seed, "mode-conditions")
    out = []
    for c in range(cases):
        d = dims[c % len(dims)]
        while True:
            lam = np.sort(rng.standard_normal(d))[::-1]
            if lam[1] < 0 and lam[0] - lam[1] > 1e-6:
                break
        out.append((lam, _haar_orthogonal(rng, d), _haar_orthogonal(rng, d)))
    return out


def mode_condition_suite(cases: int = 1000, dims=(2, 3), seed: int = DEFAULT_SEED) -> dict:
    """Count implication violations between the two conditions and definiteness."""
    counts = {"cases": 0, "sufficient": 0, "necessary": 0, "negative_definite": 0,
              "sufficient_not_necessary": 0, "necessary_not_nd": 0,
              "sufficient_not_nd": 0, "nd_not_necessary": 0}
    per_dim: dict[int, dict] = {}
    for lam, V, E in mode_condition_instances(cases, dims, seed):
        d = lam.shape[0]
        res = constrained_mode_check(lam, V, E)
        H = V @ np.diag(lam) @ V.T
        L = E[:, 1:]
        nd = bool(np.all(np.linalg.eigvalsh(L.T @ H @ L) < 0))
        row = per_dim.setdefault(d, {k: 0 for k in counts})
        for tgt in (counts, row):
            tgt["cases"] += 1
            tgt["sufficient"] += res.sufficient_holds
            tgt["necessary"] += res.necessary_holds
            tgt["negative_definite"] += nd
            tgt["sufficient_not_necessary"] += res.sufficient_holds and not res.necessary_holds
            tgt["necessary_not_nd"] += res.necessary_holds and not nd
            tgt["sufficient_not_nd"] += res.sufficient_holds and not nd
            tgt["nd_not_necessary"] += nd and not res.necessary_holds
    counts["per_dim"] = {str(k): v for k, v in sorted(per_dim.items())}
    return counts


# ---------------------------------------------------------------------------
# Monte-Carlo oracles


@dataclass
class MonteCarloResult:
    anchors: np.ndarray
    rho2: np.ndarray            # mean squared distance per anchor
    se: np.ndarray              # Monte-Carlo standard error per anchor
    sq_distances: np.ndarray    # (repetitions kept, m)
    dropped: list[int]
    bandwidths: np.ndarray

    @property
    def repetitions(self) -> int:
        return self.sq_distances.shape[0]


def monte_carlo_rho2(truth: AnalyticDensity, anchors, n: int, repetitions: int,
                     config: ScmsConfig | None = None, bandwidth="auto", multiplier: float = 1.0,
                     seed: int = DEFAULT_SEED, max_drop: float = 0.2) -> MonteCarloResult:
    """Mean over fresh datasets of d^2(anchor, ridge estimate)."""
    if repetitions < 1:
        raise InvalidInputError("need at least one repetition")
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    rows, dropped, hs = [], [], []
    for rep in range(repetitions):
        X = truth.sample(n, stream(seed, "mc", rep))
        try:
            R = estimate_ridge(X, config, bandwidth=bandwidth, multiplier=multiplier, rng_seed=seed)
        except NumericalFailure:
            dropped.append(rep)
            continue
        if len(R) == 0:
            dropped.append(rep)
            continue
        rows.append(distances_to_set(A, R.points) ** 2)
        hs.append(R.h)
    if len(dropped) > max_drop * repetitions:
        raise NumericalFailure(f"{len(dropped)} of {repetitions} repetitions gave no ridge")
    if dropped:
        log.warning("dropped %d empty repetitions", len(dropped))
    D = np.array(rows)
    se = D.std(axis=0, ddof=1) / np.sqrt(D.shape[0]) if D.shape[0] > 1 else np.full(A.shape[0], np.nan)
    return MonteCarloResult(A, D.mean(axis=0), se, D, dropped, np.array(hs))


@dataclass
class CltReport:
    statistic: np.ndarray         # (repetitions, d) standardized, bias-corrected
    raw_mean: np.ndarray          # mean of grad p_hat - grad p (no bias correction)
    bias_term: np.ndarray         # B(x) h^2
    mean: np.ndarray
    covariance: np.ndarray
    predicted: np.ndarray         # Sigma_0(x) = p(x) * integral grad K grad K^T
    variance_ratio: np.ndarray    # diag(covariance) / diag(predicted)
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    mean_se: np.ndarray

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in self.__dict__.items() if k != "statistic"}


def clt_gradient_check(truth: AnalyticDensity, x, n: int, h: float, repetitions: int,
                       seed: int = DEFAULT_SEED) -> CltReport:
    """Simulate sqrt(n h^(d+2)) (grad p_hat - grad p - B h^2) at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = truth.d
    kernel = KernelProfile(d)
    g_true = truth.evaluate(x, 1)
    bias = kernel.bias_constant * np.einsum("ijj->i", truth.evaluate(x, 3)) * h * h
    grads = np.empty((repetitions, d))
    for rep in range(repetitions):
        X = truth.sample(n, stream(seed, "clt", rep))
        grads[rep] = DensityModel(X, h, kernel).evaluate(x, 1)
    err = grads - g_true
    Z = math.sqrt(n * h ** (d + 2)) * (err - bias)
    cov = np.atleast_2d(np.cov(Z, rowvar=False))
    pred = kernel.grad_outer_integral * float(truth.evaluate(x, 0))
    c = Z - Z.mean(axis=0)
    sd = c.std(axis=0)
    return CltReport(
        statistic=Z, raw_mean=err.mean(axis=0), bias_term=bias, mean=Z.mean(axis=0),
        covariance=cov, predicted=pred, variance_ratio=np.diag(cov) / np.diag(pred),
        skewness=(c ** 3).mean(axis=0) / sd ** 3, excess_kurtosis=(c ** 4).mean(axis=0) / sd ** 4 - 3.0,
        mean_se=Z.std(axis=0, ddof=1) / math.sqrt(repetitions),
    )


def gaussian_1d(mean: float = 0.0, var: float = 1.0) -> AnalyticDensity:
    return AnalyticDensity(np.ones(1), np.array([[mean]]), np.array([[[var]]]), name="gaussian-1d")

