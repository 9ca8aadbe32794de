"""Bootstrap ridge replicates, local uncertainty and pointwise confidence radii."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError, NumericalFailure, UncertaintyUnavailableError
from .geometry import distances_to_set
from .pointcloud import PointCloud, as_points
from .ridge import RidgePointSet, ScmsConfig, estimate_ridge
from .rng import DEFAULT_SEED, stream, stream_key

log = logging.getLogger(__name__)

MODES = ("empirical", "smooth")
MAX_DROP_FRACTION = 0.2


def _columns(data):
    return data.columns if isinstance(data, PointCloud) else ()


def empirical_resample(data, rng: np.random.Generator) -> PointCloud:
    """n rows drawn uniformly with replacement."""
    X = as_points(data)
    idx = rng.integers(0, X.shape[0], size=X.shape[0])
    return PointCloud(X[idx], _columns(data))


def smooth_resample(data, h: float, rng: np.random.Generator) -> PointCloud:
    """n exact draws from the Gaussian KDE: X_I + h Z."""
    if not h > 0:
        raise InvalidInputError("bandwidth must be positive")
    X = as_points(data)
    idx = rng.integers(0, X.shape[0], size=X.shape[0])
    z = rng.standard_normal(X.shape)
    return PointCloud(X[idx] + h * z, _columns(data))


def thread_count() -> int:
    """Parallel width from FILAMENT_THREADS (default 1)."""
    raw = os.environ.get("FILAMENT_THREADS", "1")
    try:
        k = int(raw)
    except ValueError as exc:
        raise InvalidInputError(f"FILAMENT_THREADS must be an integer, got {raw!r}") from exc
    return max(1, k)


@dataclass
class BootstrapEnsemble:
    mode: str
    replicates: list[RidgePointSet]
    stream_ids: list[str]
    base: RidgePointSet
    h: float
    seed: int
    seeding: str = "grid"
    dropped: list[str] = field(default_factory=list)

    @property
    def B(self) -> int:
        return len(self.replicates)


def bootstrap_ridges(data, base: RidgePointSet, B: int = 100, mode: str = "smooth",
                     config: ScmsConfig | None = None, seed: int = DEFAULT_SEED,
                     seeding: str = "grid", threads: int | None = None,
                     scope: tuple[int, ...] = ()) -> BootstrapEnsemble:
    """Re-estimate the ridge on B resamples with the base bandwidth and config.

    ``seeding="grid"`` reruns the full seed lattice on every replicate;
    ``seeding="base"`` starts SCMS from the base ridge points instead, which
    is much cheaper when the ridge is known to move little.
    """
    if B < 1:
        raise InvalidInputError("B must be at least 1")
    if mode not in MODES:
        raise InvalidInputError(f"bootstrap mode must be one of {MODES}")
    if seeding not in ("grid", "base"):
        raise InvalidInputError("seeding must be 'grid' or 'base'")
    if seeding == "base" and len(base) == 0:
        raise UncertaintyUnavailableError("base ridge is empty; nothing to warm-start from")
    X = as_points(data)
    h = base.h
    name = "resample" if mode == "empirical" else "smooth"
    seeds = base.points if seeding == "base" else None

    def one(b: int) -> RidgePointSet:
        rng = stream(seed, name, *scope, b)
        Xb = empirical_resample(X, rng) if mode == "empirical" else smooth_resample(X, h, rng)
        try:
            return estimate_ridge(Xb, config, bandwidth=h, seeds=seeds, rng_seed=seed)
        except NumericalFailure as exc:
            log.warning("replicate %d failed: %s", b, exc)
            return None

    width = threads or thread_count()
    if width > 1:
        with ThreadPoolExecutor(max_workers=width) as pool:
            results = list(pool.map(one, range(B)))
    else:
        results = [one(b) for b in range(B)]
    kept, ids, dropped = [], [], []
    for b, R in enumerate(results):
        key = stream_key(name, *scope, b)
        if R is None or len(R) == 0:
            dropped.append(key)
        else:
            kept.append(R)
            ids.append(key)
    if not kept:
        raise UncertaintyUnavailableError("every bootstrap replicate produced an empty ridge")
    if len(dropped) > MAX_DROP_FRACTION * B:
        raise UncertaintyUnavailableError(f"{len(dropped)} of {B} replicates produced empty ridges")
    if dropped:
        log.warning("dropped %d empty bootstrap replicates", len(dropped))
    return BootstrapEnsemble(mode, kept, ids, base, h, seed, seeding, dropped)


@dataclass
class UncertaintyField:
    anchors: np.ndarray            # (m, d)
    distances: np.ndarray          # (m, B) rho_b(x) = d(x, replicate b)
    rho2: np.ndarray               # (m,)
    alpha: float | None = None
    radius: np.ndarray | None = None

    @classmethod
    def from_distances(cls, anchors, distances) -> "UncertaintyField":
        D = np.atleast_2d(np.asarray(distances, dtype=float))
        if D.shape[1] < 1:
            raise UncertaintyUnavailableError("no replicate distances")
        if np.any(D < 0) or not np.all(np.isfinite(D)):
            raise InvalidInputError("distances must be finite and non-negative")
        return cls(np.atleast_2d(np.asarray(anchors, dtype=float)), D, np.mean(D * D, axis=1))

    @property
    def B(self) -> int:
        return self.distances.shape[1]

    def balls(self) -> list[tuple[np.ndarray, float]]:
        if self.radius is None:
            raise InvalidInputError("confidence radii not computed")
        return list(zip(self.anchors, self.radius.tolist()))

    def covers(self, points) -> np.ndarray:
        """Whether each point lies in some ball B(x, r(x))."""
        if self.radius is None:
            raise InvalidInputError("confidence radii not computed")
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(P.shape[0], bool)
        for s in range(0, P.shape[0], 256):
            diff = P[s:s + 256, None, :] - self.anchors[None]
            dist = np.sqrt(np.einsum("mni,mni->mn", diff, diff))
            out[s:s + 256] = np.any(dist <= self.radius[None], axis=1)
        return out


def local_uncertainty(base: RidgePointSet, ensemble: BootstrapEnsemble, anchors=None) -> UncertaintyField:
    """Bootstrap mean of squared distances from each anchor to the replicate ridges.

    Anchors default to the base ridge points."""
    if ensemble.B == 0:
        raise UncertaintyUnavailableError("ensemble has no usable replicates")
    A = base.points if anchors is None else np.atleast_2d(np.asarray(anchors, dtype=float))
    if A.shape[0] == 0:
        raise UncertaintyUnavailableError("no anchors")
    D = np.column_stack([distances_to_set(A, R.points) for R in ensemble.replicates])
    return UncertaintyField.from_distances(A, D)


def order_statistic_index(B: int, alpha: float) -> int:
    """1-based index k = ceil((1 - alpha) B), clamped to [1, B]."""
    k = math.ceil((1.0 - alpha) * B - 1e-9)
    return min(max(k, 1), B)


def confidence_radii(field_: UncertaintyField, alpha: float) -> UncertaintyField:
    """r_{1-alpha}(x) as the ceil((1-alpha)B)-th smallest replicate distance."""
    if not 0 < alpha < 1:
        raise InvalidInputError("alpha must be in (0, 1)")
    k = order_statistic_index(field_.B, alpha)
    r = np.sort(field_.distances, axis=1)[:, k - 1]
    return replace(field_, alpha=float(alpha), radius=r)


@dataclass
class CoverageReport:
    anchors: np.ndarray            # true ridge points used for scoring
    alphas: tuple[float, ...]
    covered: np.ndarray            # (repetitions kept, len(alphas), m) bool
    interior: np.ndarray           # (m,) bool, outside the boundary zone
    dropped: list[int]
    repetitions: int

    @property
    def per_anchor(self) -> np.ndarray:
        """(len(alphas), m) empirical coverage."""
        return self.covered.mean(axis=0)

    def interior_mean(self, alpha: float | None = None) -> float:
        j = 0 if alpha is None else self.alphas.index(alpha)
        return float(self.per_anchor[j, self.interior].mean())

    def to_dict(self) -> dict:
        return {
            "alphas": list(self.alphas),
            "repetitions": self.repetitions,
            "kept": int(self.covered.shape[0]),
            "dropped": self.dropped,
            "interior_anchors": int(self.interior.sum()),
            "interior_mean_coverage": {str(a): self.interior_mean(a) for a in self.alphas},
        }


def coverage_experiment(truth, n: int, B: int, alpha, repetitions: int, mode: str = "smooth",
                        config: ScmsConfig | None = None, bandwidth="auto", multiplier: float = 1.0,
                        seed: int = DEFAULT_SEED, anchors: int = 120, seeding: str = "base",
                        boundary_factor: float = 2.0, threads: int | None = None) -> CoverageReport:
    """Repeat: sample, estimate, bootstrap, and score coverage of true ridge anchors.

    A true anchor is covered when it lies in some ball B(x, r(x)) of the
    confidence set.  Anchors within ``boundary_factor * h`` arc length of an
    open ridge's ends are excluded from the interior mean.
    """
    if repetitions < 1:
        raise InvalidInputError("coverage needs at least one repetition")
    if truth.ridge is None:
        raise InvalidInputError("truth density has no known ridge")
    alphas = tuple(float(a) for a in np.atleast_1d(alpha))
    ridge = truth.ridge.subsample(anchors)
    rows, dropped, hs = [], [], []
    for rep in range(repetitions):
        X = truth.sample(n, stream(seed, "coverage", rep))
        try:
            base = estimate_ridge(X, config, bandwidth=bandwidth, multiplier=multiplier, rng_seed=seed)
            if len(base) == 0:
                raise UncertaintyUnavailableError("empty base ridge")
            ens = bootstrap_ridges(X, base, B, mode, config, seed=seed, seeding=seeding,
                                  threads=threads, scope=(rep,))
        except (NumericalFailure, UncertaintyUnavailableError) as exc:
            log.warning("coverage repetition %d dropped: %s", rep, exc)
            dropped.append(rep)
            continue
        fld = local_uncertainty(base, ens)
        rows.append([confidence_radii(fld, a).covers(ridge.points) for a in alphas])
        hs.append(base.h)
    if not rows:
        raise UncertaintyUnavailableError("every coverage repetition failed")
    h_ref = float(np.median(hs))
    interior = ridge.boundary_distance() > boundary_factor * h_ref
    return CoverageReport(ridge.points, alphas, np.array(rows), interior, dropped, repetitions)
