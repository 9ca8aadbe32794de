"""Gaussian kernel density estimation with exact derivatives up to order 3."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._hermite import hermite_sum
from .errors import DegenerateDataError, InvalidInputError
from .pointcloud import as_points

_CHUNK = 1 << 15  # query x data pairs per block (sized to stay in L2)


@dataclass(frozen=True)
class KernelProfile:
    """Isotropic standard Gaussian kernel on R^d."""

    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise InvalidInputError("kernel dimension must be positive")

    @property
    def normalizer(self) -> float:
        return (2.0 * math.pi) ** (-self.dim / 2.0)

    @property
    def m2(self) -> float:
        """Per-coordinate second moment of the kernel."""
        return 1.0

    @property
    def bias_constant(self) -> float:
        """Constant in front of grad(Laplacian p) h^2 in the gradient bias."""
        return self.m2 / 2.0

    @cached_property
    def grad_outer_integral(self) -> np.ndarray:
        """Integral of grad K grad K^T over R^d.

        grad K(u) = -u K(u) and K^2 is (4 pi)^{-d/2} times the N(0, I/2)
        density, so the integral is (4 pi)^{-d/2} / 2 times the identity.
        """
        return 0.5 * (4.0 * math.pi) ** (-self.dim / 2.0) * np.eye(self.dim)

    def __call__(self, u, order: int = 0) -> np.ndarray:
        return kernel_eval(u, order, dim=self.dim)


def kernel_eval(u, order: int = 0, dim: int | None = None):
    """Value, gradient, Hessian or third-derivative tensor of K at ``u``."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u[None]
    if dim is not None and u.shape[-1] != dim:
        raise InvalidInputError("argument dimension does not match kernel")
    if order not in (0, 1, 2, 3):
        raise InvalidInputError(f"kernel derivative order must be 0..3, got {order}")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("kernel argument must be finite")
    single = u.ndim == 1
    U = u.reshape(-1, 1, u.shape[-1])
    d = U.shape[-1]
    w = (2.0 * math.pi) ** (-d / 2.0) * np.exp(-0.5 * np.einsum("mni,mni->mn", U, U))
    out = hermite_sum(w, U, np.eye(d), order)
    return out[0] if single else out.reshape(u.shape[:-1] + out.shape[1:])


def silverman_bandwidth(data, multiplier: float = 1.0) -> float:
    """Normal-reference bandwidth sigma_bar * (4 / ((d + 2) n)) ** (1 / (d + 4)).

    ``sigma_bar`` is the mean of the per-coordinate sample standard
    deviations; ``multiplier`` rescales the result (e.g. 0.7).
    """
    X = as_points(data)
    n, d = X.shape
    if n < 2:
        raise DegenerateDataError("Silverman's rule needs at least two points")
    if not multiplier > 0:
        raise InvalidInputError("bandwidth multiplier must be positive")
    sigma = X.std(axis=0, ddof=1).mean()
    if not sigma > 0:
        raise DegenerateDataError("all points are identical; bandwidth undefined")
    return float(multiplier * sigma * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4)))


@dataclass(frozen=True)
class DensityModel:
    """Gaussian KDE  p(x) = 1/(n h^d) sum_i K((x - X_i) / h)."""

    data: np.ndarray
    h: float
    kernel: KernelProfile = field(default=None)

    def __post_init__(self):
        X = np.array(as_points(self.data), dtype=float)
        X.setflags(write=False)
        object.__setattr__(self, "data", X)
        if not (np.isfinite(self.h) and self.h > 0):
            raise InvalidInputError("bandwidth must be a positive finite number")
        object.__setattr__(self, "h", float(self.h))
        if self.kernel is None:
            object.__setattr__(self, "kernel", KernelProfile(X.shape[1]))
        elif self.kernel.dim != X.shape[1]:
            raise InvalidInputError("kernel dimension does not match data")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def _queries(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        Q = np.atleast_2d(x)
        if Q.ndim != 2 or Q.shape[1] != self.d:
            raise InvalidInputError(f"query points must have dimension {self.d}")
        if not np.all(np.isfinite(Q)):
            raise InvalidInputError("query points must be finite")
        return Q, single

    def evaluate(self, x, order: int = 0) -> np.ndarray:
        """Order-``order`` derivative tensor of the KDE at ``x``.

        ``x`` may be a single point (d,) or a batch (m, d); batch results are
        identical to pointwise calls.
        """
        if order not in (0, 1, 2, 3):
            raise InvalidInputError(f"KDE derivative order must be 0..3, got {order}")
        Q, single = self._queries(x)
        n, d, h = self.n, self.d, self.h
        step = max(1, _CHUNK // n)
        blocks = []
        for start in range(0, Q.shape[0], step):
            q = Q[start:start + step]
            U = (q[:, None, :] - self.data[None, :, :]) / h
            w = self.kernel.normalizer * np.exp(-0.5 * np.einsum("mni,mni->mn", U, U))
            blocks.append(hermite_sum(w, U, np.eye(d), order))
        out = np.concatenate(blocks, axis=0) / (n * h ** (d + order))
        return out[0] if single else out

    def density(self, x):
        return self.evaluate(x, 0)

    def gradient(self, x):
        return self.evaluate(x, 1)

    def hessian(self, x):
        return self.evaluate(x, 2)

    def third(self, x):
        return self.evaluate(x, 3)

    @cached_property
    def _moment_tables(self):
        center = self.data.mean(axis=0)
        Z = self.data - center
        d = self.d
        iu = np.triu_indices(d)
        feats = np.concatenate([np.ones((self.n, 1)), Z, Z[:, iu[0]] * Z[:, iu[1]]], axis=1)
        inv = 1.0 / (self.h * self.h)
        # exponent = x.z / h^2 - |z|^2 / 2h^2 - |x|^2 / 2h^2 via one matmul
        right = np.concatenate([Z * inv, -0.5 * inv * (Z * Z).sum(axis=1, keepdims=True),
                                np.ones((self.n, 1))], axis=1)
        return center, np.ascontiguousarray(right.T), feats, iu

    def local_moments(self, x):
        """Density, gradient, Hessian and mean-shift vector at a batch of points.

        Uses the kernel-weighted raw moments of the data, which costs one
        exponential per (query, data) pair; the SCMS loop relies on this.
        """
        Q, single = self._queries(x)
        center, right, feats, iu = self._moment_tables
        n, d, h = self.n, self.d, self.h
        Y = Q - center
        inv = 1.0 / (h * h)
        step = max(1, _CHUNK // n)
        S = np.empty((Q.shape[0], feats.shape[1]))
        xsq = -0.5 * inv * (Y * Y).sum(axis=1, keepdims=True)
        left = np.concatenate([Y, np.ones((Y.shape[0], 1)), xsq], axis=1)
        for start in range(0, Q.shape[0], step):
            sl = slice(start, start + step)
            E = left[sl] @ right
            np.exp(E, out=E)
            S[sl] = E @ feats
        S0 = S[:, 0]
        S1 = S[:, 1:1 + d]
        S2 = np.empty((Q.shape[0], d, d))
        S2[:, iu[0], iu[1]] = S[:, 1 + d:]
        S2[:, iu[1], iu[0]] = S[:, 1 + d:]
        C1 = S1 - S0[:, None] * Y
        C2 = (S2 - Y[:, :, None] * S1[:, None, :] - S1[:, :, None] * Y[:, None, :]
              + S0[:, None, None] * Y[:, :, None] * Y[:, None, :])
        c = self.kernel.normalizer / (n * h ** d)
        p = c * S0
        g = c * inv * C1
        H = c * inv * (inv * C2 - S0[:, None, None] * np.eye(d))
        with np.errstate(invalid="ignore", divide="ignore"):
            shift = C1 / S0[:, None]
        if single:
            return p[0], g[0], H[0], shift[0]
        return p, g, H, shift


def kde_eval(model: DensityModel, x, order: int = 0):
    return model.evaluate(x, order)


def sup_norm_diff(model, truth, order: int, grid, also_max_over_orders: bool = False) -> float:
    """max over ``grid`` and |alpha| = order of |D^alpha model - D^alpha truth|.

    ``truth`` is anything with ``evaluate(x, order)``.  With
    ``also_max_over_orders`` the maximum is also taken over orders 0..order.
    """
    G = np.atleast_2d(np.asarray(grid, dtype=float))
    if G.size == 0 or G.shape[0] == 0:
        raise InvalidInputError("sup-norm grid must be non-empty")
    orders = range(order + 1) if also_max_over_orders else (order,)
    worst = 0.0
    for j in orders:
        diff = np.asarray(model.evaluate(G, j)) - np.asarray(truth.evaluate(G, j))
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst
