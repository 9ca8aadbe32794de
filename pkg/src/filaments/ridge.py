"""Density ridges: local Hessian spectrum, seeding, thresholding and SCMS."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError
from .kernel_density import DensityModel, silverman_bandwidth
from .pointcloud import as_points

log = logging.getLogger(__name__)

_SIGN_TIE = 1e-12


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each column (last axis holds columns) so its largest entry is positive.

    Entries within a relative 1e-12 of the largest magnitude count as ties;
    the first of them decides.
    """
    mag = np.abs(vecs)
    top = mag.max(axis=-2, keepdims=True)
    lead = np.argmax(mag >= top * (1.0 - _SIGN_TIE), axis=-2)
    picked = np.take_along_axis(vecs, lead[..., None, :], axis=-2)
    signs = np.where(picked < 0, -1.0, 1.0)
    return vecs * signs


@dataclass(frozen=True)
class LocalSpectrum:
    eigenvalues: np.ndarray      # descending
    eigenvectors: np.ndarray     # columns, matching eigenvalues
    gradient: np.ndarray

    @property
    def V(self) -> np.ndarray:
        return self.eigenvectors[:, 1:]

    @property
    def eigengap(self) -> float:
        return float(self.eigenvalues[0] - self.eigenvalues[1])

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def projected_gradient(self) -> np.ndarray:
        V = self.V
        return V @ (V.T @ self.gradient)

    def is_ridge_like(self) -> bool:
        return self.lambda2 < 0 and self.eigengap > 0


def local_spectrum(g, H) -> LocalSpectrum:
    """Sorted eigen-decomposition of ``H`` and the projected gradient of ``g``."""
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
        raise InvalidInputError("gradient and Hessian must be finite")
    d = g.shape[0]
    if H.shape != (d, d) or d < 2:
        raise InvalidInputError("need a d-vector and a d x d matrix with d >= 2")
    scale = max(np.abs(H).max(), np.finfo(float).tiny)
    if np.abs(H - H.T).max() > 1e-8 * scale:
        raise InvalidInputError("Hessian is not symmetric")
    H = 0.5 * (H + H.T)
    w, v = np.linalg.eigh(H)
    w, v = w[::-1], v[:, ::-1]
    return LocalSpectrum(w.copy(), _fix_signs(v), g.copy())


def _batch_spectrum(H: np.ndarray):
    """Descending eigenvalues and sign-fixed eigenvectors for a stack of matrices."""
    w, v = np.linalg.eigh(0.5 * (H + np.swapaxes(H, -1, -2)))
    return w[:, ::-1], _fix_signs(v[:, :, ::-1])


def seed_grid(bounds, counts) -> np.ndarray:
    """Uniform lattice over ``bounds`` including endpoints, row-major (first axis slowest)."""
    bounds = np.asarray(bounds, dtype=float)
    counts = [int(c) for c in counts]
    if bounds.ndim != 2 or bounds.shape[1] != 2 or bounds.shape[0] != len(counts):
        raise InvalidInputError("bounds must be (d, 2) matching the per-axis counts")
    if not np.all(np.isfinite(bounds)):
        raise InvalidInputError("grid bounds must be finite")
    if np.any(bounds[:, 1] < bounds[:, 0]):
        raise InvalidInputError("grid bounds are inverted")
    if any(c < 2 for c in counts):
        raise InvalidInputError("need at least two grid points per axis")
    axes = [np.linspace(lo, hi, c) for (lo, hi), c in zip(bounds, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def threshold_filter(seeds, model: DensityModel, tau: float, densities=None):
    """Indices of seeds whose density is at least ``tau`` times the seed maximum."""
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.shape[0] == 0 or seeds.size == 0:
        raise InvalidInputError("no seeds to threshold")
    if not 0 < tau < 1:
        raise InvalidInputError("threshold fraction must lie in (0, 1)")
    dens = model.density(seeds) if densities is None else np.asarray(densities, dtype=float)
    return np.flatnonzero(dens >= tau * dens.max())


@dataclass(frozen=True)
class ScmsConfig:
    tol_G: float = 1e-8
    max_iter: int = 500
    tau: float = 0.1
    grid: tuple[int, ...] = (50, 50)
    bounds: tuple[tuple[float, float], ...] | None = None
    merge_radius: float | None = None      # default h / 10
    projection: str = "log"                # step subspace from the log-density or the density Hessian

    def __post_init__(self):
        if not self.tol_G > 0:
            raise InvalidInputError("tol_G must be positive")
        if int(self.max_iter) < 1:
            raise InvalidInputError("max_iter must be positive")
        if not 0 < self.tau < 1:
            raise InvalidInputError("tau must lie in (0, 1)")
        if any(int(c) < 2 for c in self.grid):
            raise InvalidInputError("grid counts must be >= 2 per axis")
        if self.projection not in ("log", "density"):
            raise InvalidInputError("projection must be 'log' or 'density'")
        object.__setattr__(self, "grid", tuple(int(c) for c in self.grid))
        if self.bounds is not None:
            object.__setattr__(self, "bounds", tuple(tuple(map(float, b)) for b in self.bounds))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AscentResult:
    point: np.ndarray
    converged: bool
    reason: str
    iterations: int
    grad_norm: float
    lambda2: float
    eigengap: float
    density: float
    trajectory: list | None = None


@dataclass
class RidgePointSet:
    """Converged SCMS points with per-point diagnostics (original units).

    ``grad_norm`` is the projected-gradient norm in the internal
    standardized frame, which is where ``tol_G`` applies.
    """

    points: np.ndarray
    grad_norm: np.ndarray
    lambda2: np.ndarray
    eigengap: np.ndarray
    density: np.ndarray
    iterations: np.ndarray
    seed_index: np.ndarray
    h: float
    tol_G: float
    config_hash: str = ""
    rng_seed: int | None = None
    n_seeds: int = 0
    n_retained: int = 0
    n_converged: int = 0
    rejected: dict = field(default_factory=dict)
    steps: int = 0
    density_decreases: int = 0
    frame_center: np.ndarray | None = None
    frame_scale: float = 1.0

    def working_points(self) -> np.ndarray:
        """Points in the standardized frame where SCMS ran."""
        c = 0.0 if self.frame_center is None else self.frame_center
        return (self.points - c) / self.frame_scale

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def status(self) -> str:
        return "ok" if len(self) else "empty"

    def subset(self, idx) -> "RidgePointSet":
        idx = np.asarray(idx, dtype=int)
        out = RidgePointSet(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        for name in ("points", "grad_norm", "lambda2", "eigengap", "density", "iterations", "seed_index"):
            setattr(out, name, getattr(self, name)[idx])
        return out


class _Frame:
    """Translation plus isotropic scaling; preserves ridges of isotropic KDEs."""

    def __init__(self, X: np.ndarray):
        self.center = X.mean(axis=0)
        scale = X.std(axis=0, ddof=1).mean() if X.shape[0] > 1 else 0.0
        self.scale = float(scale) if scale > 0 else 1.0

    def fwd(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.scale

    def inv(self, z):
        return np.asarray(z) * self.scale + self.center


def _projector_columns(H, g, p, projection):
    """Columns spanning the step subspace (d-1 smallest directions)."""
    if projection == "log":
        with np.errstate(invalid="ignore", divide="ignore"):
            M = H / p[:, None, None] - g[:, :, None] * g[:, None, :] / (p * p)[:, None, None]
    else:
        M = H
    _, v = np.linalg.eigh(0.5 * (M + np.swapaxes(M, -1, -2)))
    return v[:, :, :-1]


def _scms_batch(model: DensityModel, seeds: np.ndarray, cfg: ScmsConfig, trace: bool = False):
    """Run SCMS from every seed at once (model already in the working frame)."""
    x = np.array(seeds, dtype=float)
    m = x.shape[0]
    converged = np.zeros(m, bool)
    failed = np.zeros(m, bool)
    iters = np.zeros(m, int)
    gnorm = np.full(m, np.nan)
    last_p = np.full(m, -np.inf)
    active = np.arange(m)
    steps = 0
    decreases = 0
    traj = [[x[i].copy()] for i in range(m)] if trace else None
    tdata = [[] for _ in range(m)] if trace else None
    for it in range(cfg.max_iter + 1):
        if active.size == 0:
            break
        xa = x[active]
        p, g, H, shift = model.local_moments(xa)
        bad = ~(np.isfinite(p) & np.all(np.isfinite(g), 1) & np.all(np.isfinite(H), (1, 2)) & (p > 0))
        if bad.any():
            failed[active[bad]] = True
        ok = ~bad
        decreases += int(np.sum(p[ok] < last_p[active[ok]] - 1e-9 * np.abs(last_p[active[ok]])))
        last_p[active] = p
        Gn = np.full(active.size, np.inf)
        if ok.any():
            _, v = np.linalg.eigh(0.5 * (H[ok] + np.swapaxes(H[ok], -1, -2)))
            Vh = v[:, :, :-1]
            G = np.einsum("mij,mj->mi", Vh, np.einsum("mji,mj->mi", Vh, g[ok]))
            Gn[ok] = np.linalg.norm(G, axis=1)
        gnorm[active] = Gn
        done = ok & (Gn <= cfg.tol_G)
        converged[active[done]] = True
        move = ok & ~done
        if it == cfg.max_iter or not move.any():
            active = active[move] if it < cfg.max_iter else active[:0]
            if it == cfg.max_iter:
                break
            continue
        idx = active[move]
        V = _projector_columns(H[move], g[move], p[move], cfg.projection)
        step = np.einsum("mij,mj->mi", V, np.einsum("mji,mj->mi", V, shift[move]))
        if not np.all(np.isfinite(step)):
            nan_rows = ~np.all(np.isfinite(step), 1)
            failed[idx[nan_rows]] = True
            idx, step, V = idx[~nan_rows], step[~nan_rows], V[~nan_rows]
        x[idx] += step
        iters[idx] += 1
        steps += idx.size
        if trace:
            for j, i in enumerate(idx):
                traj[i].append(x[i].copy())
                tdata[i].append((step[j].copy(), V[j].copy()))
        active = idx
    return x, converged, failed, iters, gnorm, steps, decreases, (traj, tdata)


def _diagnostics(model: DensityModel, z: np.ndarray):
    p, g, H, _ = model.local_moments(z)
    w, v = _batch_spectrum(H)
    return p, w


def _rejection_reasons(converged, failed, lam, gap, scale_gap):
    reasons = np.full(converged.shape, "", dtype=object)
    reasons[~converged] = "max-iter"
    reasons[failed] = "numerical-failure"
    ok = converged & ~failed
    reasons[ok & (lam[:, 1] >= 0)] = "lambda2-nonnegative"
    reasons[ok & (lam[:, 1] < 0) & (gap <= scale_gap)] = "eigengap-degenerate"
    return reasons


def scms_ascend(seed, model: DensityModel, config: ScmsConfig | None = None, trace: bool = False) -> AscentResult:
    """Subspace-constrained mean shift from a single seed (coordinates as given)."""
    cfg = config or ScmsConfig()
    seed = np.asarray(seed, dtype=float)
    x, conv, failed, iters, gn, _, _, (traj, tdata) = _scms_batch(model, seed[None, :], cfg, trace)
    p, lam = _diagnostics(model, x)
    gap = lam[:, 0] - lam[:, 1]
    reason = _rejection_reasons(conv, failed, lam, gap, 1e-12 * np.abs(lam).max(1))[0]
    res = AscentResult(
        point=x[0], converged=bool(conv[0]) and not failed[0] and reason == "",
        reason=reason or "converged", iterations=int(iters[0]), grad_norm=float(gn[0]),
        lambda2=float(lam[0, 1]), eigengap=float(gap[0]), density=float(p[0]),
    )
    if trace:
        res.trajectory = list(zip(traj[0], [None] + tdata[0]))
    return res


def resolve_bandwidth(data, bandwidth="auto", multiplier: float = 1.0) -> float:
    if bandwidth is None or bandwidth == "auto":
        return silverman_bandwidth(data, multiplier)
    h = float(bandwidth) * float(multiplier)
    if not (math.isfinite(h) and h > 0):
        raise InvalidInputError("bandwidth must be positive")
    return h


def config_hash(config: ScmsConfig, h: float) -> str:
    blob = json.dumps({"config": config.to_dict(), "h": repr(float(h))}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _dedup(z: np.ndarray, gnorm: np.ndarray, order_key: np.ndarray, radius: float) -> np.ndarray:
    """Greedy merge: keep points in increasing grad-norm order unless a kept one is within ``radius``."""
    order = np.lexsort((order_key, gnorm))
    kept: list[int] = []
    kept_pts = np.empty((0, z.shape[1]))
    r2 = radius * radius
    for i in order:
        if kept_pts.shape[0]:
            d2 = ((kept_pts - z[i]) ** 2).sum(axis=1)
            if d2.min() < r2:
                continue
        kept.append(i)
        kept_pts = np.vstack([kept_pts, z[i]])
    return np.sort(np.asarray(kept, dtype=int))


def default_bounds(X: np.ndarray, h: float) -> np.ndarray:
    return np.stack([X.min(axis=0) - h, X.max(axis=0) + h], axis=1)


def estimate_ridge(data, config: ScmsConfig | None = None, bandwidth="auto", multiplier: float = 1.0,
                   seeds=None, rng_seed: int | None = None) -> RidgePointSet:
    """Threshold a seed set against the KDE and run SCMS to the ridge.

    ``seeds`` overrides the lattice; by default it spans the data bounding
    box padded by h on each side.  Converged points closer than the merge
    radius collapse onto the one with the smaller projected gradient.
    """
    cfg = config or ScmsConfig()
    X = as_points(data)
    n, d = X.shape
    if d < 2:
        raise InvalidInputError("ridge estimation needs d >= 2")
    h = resolve_bandwidth(X, bandwidth, multiplier)
    if seeds is None:
        if len(cfg.grid) != d:
            raise InvalidInputError(f"grid spec has {len(cfg.grid)} axes for {d}-dimensional data")
        bounds = np.asarray(cfg.bounds) if cfg.bounds is not None else default_bounds(X, h)
        seeds = seed_grid(bounds, cfg.grid)
    else:
        seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    frame = _Frame(X)
    work = DensityModel(frame.fwd(X), h / frame.scale)
    zs = frame.fwd(seeds)
    p0 = work.local_moments(zs)[0] if zs.shape[0] else np.empty(0)
    keep = threshold_filter(zs, work, cfg.tau, densities=p0) if zs.shape[0] else np.empty(0, int)
    empty = RidgePointSet(
        points=np.empty((0, d)), grad_norm=np.empty(0), lambda2=np.empty(0), eigengap=np.empty(0),
        density=np.empty(0), iterations=np.empty(0, int), seed_index=np.empty(0, int), h=h,
        tol_G=cfg.tol_G, config_hash=config_hash(cfg, h), rng_seed=rng_seed, n_seeds=int(zs.shape[0]),
        n_retained=int(keep.size), frame_center=frame.center, frame_scale=frame.scale,
    )
    if keep.size == 0:
        log.warning("no seeds survived thresholding; ridge is empty")
        return empty
    z, conv, failed, iters, gn, steps, decreases, _ = _scms_batch(work, zs[keep], cfg)
    p, lam = _diagnostics(work, z)
    gap = lam[:, 0] - lam[:, 1]
    reasons = _rejection_reasons(conv, failed, lam, gap, 1e-12 * np.abs(lam).max(1))
    good = np.flatnonzero(reasons == "")
    rejected = dict(sorted(Counter(r for r in reasons if r).items()))
    empty.rejected = rejected
    empty.steps = int(steps)
    empty.density_decreases = int(decreases)
    empty.n_converged = int(conv.sum())
    if good.size == 0:
        log.warning("no seed converged to a ridge point; ridge is empty")
        return empty
    radius = (h / 10.0 if cfg.merge_radius is None else cfg.merge_radius) / frame.scale
    sel = good[_dedup(z[good], gn[good], keep[good], radius)] if radius > 0 else good
    s = frame.scale
    return RidgePointSet(
        points=frame.inv(z[sel]),
        grad_norm=gn[sel],
        lambda2=lam[sel, 1] / s ** (d + 2),
        eigengap=gap[sel] / s ** (d + 2),
        density=p[sel] / s ** d,
        iterations=iters[sel],
        seed_index=keep[sel],
        h=h, tol_G=cfg.tol_G, config_hash=empty.config_hash, rng_seed=rng_seed,
        n_seeds=empty.n_seeds, n_retained=empty.n_retained, n_converged=empty.n_converged,
        rejected=rejected, steps=int(steps), density_decreases=int(decreases),
        frame_center=frame.center, frame_scale=frame.scale,
    )
