"""Point-set distances, curve ordering, Frenet frames and normal-space intersections."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError, OutOfRangeError

log = logging.getLogger(__name__)

BRUTE_FORCE_PAIRS = 10_000_000
_BLOCK = 1 << 20


def _as_set(A, name="set") -> np.ndarray:
    A = np.asarray(getattr(A, "points", A), dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    if A.size == 0 or A.shape[0] == 0:
        raise InvalidInputError(f"{name} must be non-empty")
    return A


def distances_to_set(X, A) -> np.ndarray:
    """d(x, A) for every row x of ``X`` (exact nearest-neighbour distance)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = _as_set(A)
    if X.shape[0] * A.shape[0] > BRUTE_FORCE_PAIRS:
        dist, _ = cKDTree(A).query(X, k=1)
        return np.asarray(dist, dtype=float)
    out = np.empty(X.shape[0])
    step = max(1, _BLOCK // A.shape[0])
    for s in range(0, X.shape[0], step):
        diff = X[s:s + step, None, :] - A[None, :, :]
        out[s:s + step] = np.sqrt(np.einsum("mni,mni->mn", diff, diff).min(axis=1))
    return out


def distance_to_set(x, A) -> float:
    """inf over y in A of |x - y|."""
    return float(distances_to_set(np.asarray(x, dtype=float)[None, :], A)[0])


def hausdorff(A, B) -> float:
    """Hausdorff distance between two finite point sets."""
    A = _as_set(A, "A")
    B = _as_set(B, "B")
    return float(max(distances_to_set(A, B).max(), distances_to_set(B, A).max()))


@dataclass(frozen=True)
class PolylineCurve:
    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[0] < 2:
            raise InvalidInputError("a polyline needs at least two vertices")
        seg = np.linalg.norm(np.diff(V, axis=0), axis=1)
        if np.any(seg == 0):
            raise InvalidInputError("consecutive polyline vertices must be distinct")
        object.__setattr__(self, "vertices", V)

    @property
    def segments(self) -> np.ndarray:
        """(m, 2, d) array of segment endpoints, including the closing one."""
        V = self.vertices
        if self.closed:
            return np.stack([V, np.roll(V, -1, axis=0)], axis=1)
        return np.stack([V[:-1], V[1:]], axis=1)

    @property
    def arclength(self) -> np.ndarray:
        """Cumulative arc length at each vertex (starts at 0)."""
        seg = np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        L = self.arclength[-1]
        if self.closed:
            L += float(np.linalg.norm(self.vertices[0] - self.vertices[-1]))
        return float(L)

    def point_at(self, s: float) -> np.ndarray:
        s = self._wrap(s)
        knots = self.arclength
        V = self.vertices
        if self.closed:
            knots = np.append(knots, self.length)
            V = np.vstack([V, V[:1]])
        return np.array([np.interp(s, knots, V[:, k]) for k in range(V.shape[1])])

    def _wrap(self, s: float) -> float:
        L = self.length
        if self.closed:
            return float(s % L)
        if s < -1e-12 * L or s > L * (1 + 1e-12):
            raise OutOfRangeError(f"parameter {s} outside [0, {L}] of open curve")
        return float(min(max(s, 0.0), L))


def order_curve(points, h: float, cap_factor: float = 3.0) -> list[PolylineCurve]:
    """Chain 2-D ridge points into polylines by greedy nearest-neighbour walks.

    Links longer than ``cap_factor * h`` are never made, which splits
    separate filaments.  A chain is closed when its two ends are within the
    cap.  Single leftover points are dropped.
    """
    P = np.asarray(getattr(points, "points", points), dtype=float)
    if P.ndim != 2 or P.shape[0] < 2:
        log.warning("fewer than two points; no curves")
        return []
    if P.shape[1] != 2:
        raise InvalidInputError("curve ordering is implemented for 2-D points only")
    cap = cap_factor * h
    tree = cKDTree(P)
    free = np.ones(P.shape[0], bool)

    def nearest_free(i):
        k = min(P.shape[0], 16)
        while True:
            dist, idx = tree.query(P[i], k=k, distance_upper_bound=cap)
            dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
            for dd, j in zip(dist, idx):
                if np.isinf(dd):
                    return None
                if free[j] and dd > 0:
                    return j
            if k >= P.shape[0]:
                return None
            k = min(P.shape[0], 4 * k)

    curves = []
    for start in range(P.shape[0]):
        if not free[start]:
            continue
        free[start] = False
        chain = [start]
        for _ in range(2):
            while True:
                j = nearest_free(chain[-1])
                if j is None:
                    break
                free[j] = False
                chain.append(j)
            chain.reverse()
        if len(chain) < 2:
            continue
        verts = P[chain]
        closed = len(chain) > 2 and np.linalg.norm(verts[0] - verts[-1]) <= cap
        curves.append(PolylineCurve(verts, closed=closed))
    return curves


def vertex_chains(points, h: float, cap_factor: float = 3.0) -> np.ndarray:
    """Curve id per input point (-1 for points left out of every polyline)."""
    P = np.asarray(getattr(points, "points", points), dtype=float)
    ids = np.full(P.shape[0], -1, dtype=int)
    if P.shape[0] < 2:
        return ids
    lookup = {tuple(p): i for i, p in enumerate(P)}
    for cid, curve in enumerate(order_curve(P, h, cap_factor)):
        for v in curve.vertices:
            ids[lookup[tuple(v)]] = cid
    return ids


@dataclass(frozen=True)
class FrenetFrame:
    vectors: np.ndarray        # (k, d) rows e_1..e_k
    degenerate: bool = False
    degenerate_from: int | None = None   # first index whose Gram-Schmidt step collapsed


def _fd_derivatives(t: np.ndarray, pts: np.ndarray, kmax: int) -> list[np.ndarray]:
    """Derivatives 1..kmax at t=0 of the interpolating polynomial through (t, pts)."""
    scale = np.abs(t).max()
    tau = t / scale
    A = np.vander(tau, N=len(tau), increasing=True)
    coef = np.linalg.solve(A, pts)
    return [factorial(j) * coef[j] / scale ** j for j in range(1, kmax + 1)]


def frenet_frame(curve: PolylineCurve, s: float, k: int = 2) -> FrenetFrame:
    """Gram-Schmidt frame from finite-difference derivatives on arc length.

    Uses the 2k+1 vertices around ``s``.  Collapsed directions are replaced
    by an orthonormal completion and flagged as degenerate.
    """
    d = curve.vertices.shape[1]
    if not 1 <= k <= d:
        raise InvalidInputError("number of frame vectors must be between 1 and d")
    s = curve._wrap(s)
    knots = curve.arclength
    V = curve.vertices
    m = V.shape[0]
    if m < 2 * k + 1:
        raise InvalidInputError(f"need at least {2 * k + 1} vertices for a {k}-vector frame")
    L = curve.length
    if curve.closed:
        centre = int(np.argmin(np.abs((knots - s + L / 2) % L - L / 2)))
        idx = [(centre + o) % m for o in range(-k, k + 1)]
        t = np.array([knots[i] for i in idx]) - s
        t = (t + L / 2) % L - L / 2
        # keep the window ordered around s
        offs = np.array(range(-k, k + 1))
        t = np.where((offs < 0) & (t > 0), t - L, t)
        t = np.where((offs > 0) & (t < 0), t + L, t)
    else:
        centre = int(np.clip(np.searchsorted(knots, s), k, m - k - 1))
        if abs(knots[centre - 1] - s) < abs(knots[centre] - s) and centre - 1 >= k:
            centre -= 1
        idx = list(range(centre - k, centre + k + 1))
        t = knots[idx] - s
    derivs = _fd_derivatives(t, V[idx], k)
    basis: list[np.ndarray] = []
    degenerate_from = None
    for j, dj in enumerate(derivs):
        e = dj - sum(np.dot(dj, b) * b for b in basis) if basis else dj.copy()
        norm = np.linalg.norm(e)
        if norm < 1e-8 * max(np.linalg.norm(dj), 1.0):
            degenerate_from = j
            break
        basis.append(e / norm)
    if degenerate_from is not None:
        basis = _complete(basis, d)[:k]
    return FrenetFrame(np.array(basis), degenerate=degenerate_from is not None, degenerate_from=degenerate_from)


def _complete(basis: list[np.ndarray], d: int) -> list[np.ndarray]:
    """Extend orthonormal vectors to a full orthonormal basis of R^d."""
    if d == 2 and len(basis) == 1:
        e = basis[0]
        return [e, np.array([-e[1], e[0]])]
    out = list(basis)
    for i in range(d):
        if len(out) == d:
            break
        v = np.eye(d)[i] - sum(np.dot(np.eye(d)[i], b) * b for b in out)
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            out.append(v / nv)
    return out


@dataclass(frozen=True)
class NormalSpace:
    anchor: np.ndarray
    basis: np.ndarray        # (d, d-1) columns e_2..e_d
    r_clip: float

    def __post_init__(self):
        A = np.asarray(self.anchor, dtype=float)
        B = np.asarray(self.basis, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.shape[0] != A.shape[0] or B.shape[1] != A.shape[0] - 1:
            raise InvalidInputError("normal basis must be d x (d-1)")
        if np.abs(B.T @ B - np.eye(B.shape[1])).max() > 1e-9:
            raise InvalidInputError("normal basis must be orthonormal")
        if not self.r_clip > 0:
            raise InvalidInputError("clip radius must be positive")
        object.__setattr__(self, "anchor", A)
        object.__setattr__(self, "basis", B)

    @classmethod
    def from_frame(cls, anchor, frame: FrenetFrame, r_clip: float) -> "NormalSpace":
        e1 = frame.vectors[0]
        d = e1.shape[0]
        B = np.column_stack(_complete(list(frame.vectors), d)[1:])
        return cls(np.asarray(anchor, dtype=float), B, r_clip)


def _segment_hits_2d(space: NormalSpace, segments: np.ndarray) -> np.ndarray:
    a = space.anchor
    n = space.basis[:, 0]
    p0 = segments[:, 0, :]
    e = segments[:, 1, :] - p0
    # solve a + t n = p0 + u e
    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    den = cross(np.broadcast_to(n, e.shape), e)
    w = p0 - a
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross(w, e) / den
        u = cross(w, np.broadcast_to(n, e.shape)) / den
    ok = (np.abs(den) > 1e-14) & (u >= -1e-12) & (u <= 1 + 1e-12) & (np.abs(t) <= space.r_clip)
    return a + t[ok, None] * n


def normal_intersection(space: NormalSpace, target, tol_band: float | None = None):
    """Point of ``target`` on the normal space nearest the anchor, or None.

    ``target`` is a polyline, a list of polylines (2-D only) or a raw point
    set; raw points count when within ``tol_band`` of the normal space.
    """
    curves = None
    if isinstance(target, PolylineCurve):
        curves = [target]
    elif isinstance(target, (list, tuple)) and target and all(isinstance(c, PolylineCurve) for c in target):
        curves = list(target)
    if curves is not None:
        if space.anchor.shape[0] != 2:
            raise InvalidInputError("polyline intersection is implemented for d = 2")
        hits = [_segment_hits_2d(space, c.segments) for c in curves]
        hits = np.vstack(hits) if hits else np.empty((0, 2))
    else:
        if tol_band is None:
            raise InvalidInputError("raw point sets need a tolerance band")
        P = np.asarray(getattr(target, "points", target), dtype=float)
        if P.size == 0:
            return None
        diff = P - space.anchor
        coords = diff @ space.basis
        off = np.linalg.norm(diff - coords @ space.basis.T, axis=1)
        keep = (off <= tol_band) & (np.linalg.norm(coords, axis=1) <= space.r_clip)
        hits = P[keep]
    if hits.shape[0] == 0:
        return None
    return hits[np.argmin(np.linalg.norm(hits - space.anchor, axis=1))]


def distances_to_curves(X, curves) -> np.ndarray:
    """Distance from each row of ``X`` to the union of polyline segments."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not curves:
        raise InvalidInputError("need at least one curve")
    segs = np.concatenate([c.segments for c in curves], axis=0)
    p0 = segs[:, 0]
    e = segs[:, 1] - p0
    ee = np.einsum("ij,ij->i", e, e)
    out = np.empty(X.shape[0])
    step = max(1, _BLOCK // segs.shape[0])
    for s in range(0, X.shape[0], step):
        w = X[s:s + step, None, :] - p0[None]
        u = np.clip(np.einsum("mni,ni->mn", w, e) / ee, 0.0, 1.0)
        r = w - u[..., None] * e[None]
        out[s:s + step] = np.sqrt(np.einsum("mni,mni->mn", r, r).min(axis=1))
    return out
