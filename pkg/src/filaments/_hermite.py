"""Weighted sums of Gaussian derivative tensors.

For a Gaussian factor exp(-(x-m)^T P (x-m) / 2) with y = P (x-m), the
derivatives of orders 0..4 are polynomial in y and P times the factor
itself.  Both the KDE (P = I in kernel units) and the analytic mixtures
(one P per component) reduce to sums of those polynomials.
"""

from __future__ import annotations

import numpy as np

MAX_ORDER = 4


def hermite_sum(w: np.ndarray, y: np.ndarray, P: np.ndarray, order: int) -> np.ndarray:
    """Sum over axis 1 of ``w * D^order`` multipliers.

    w: (m, n) weights (factor values), y: (m, n, d), P: (d, d) or (n, d, d).
    Returns an (m,) array for order 0, else (m,) + (d,) * order.
    """
    m, n, d = y.shape
    if P.ndim == 2:
        P = np.broadcast_to(P, (n, d, d))
    if order == 0:
        return w.sum(axis=1)
    if order == 1:
        return -np.einsum("mn,mni->mi", w, y)
    if order == 2:
        return np.einsum("mn,mni,mnj->mij", w, y, y) - np.einsum("mn,nij->mij", w, P)
    if order == 3:
        A = np.einsum("mn,nij,mnk->mijk", w, P, y)
        out = -np.einsum("mn,mni,mnj,mnk->mijk", w, y, y, y)
        out += A
        out += np.einsum("mikj->mijk", A)
        out += np.einsum("mjki->mijk", A)
        return out
    if order == 4:
        C = np.einsum("mn,nij,mnk,mnl->mijkl", w, P, y, y)
        E = np.einsum("mn,nij,nkl->mijkl", w, P, P)
        out = np.einsum("mn,mni,mnj,mnk,mnl->mijkl", w, y, y, y, y)
        for spec in ("mijkl", "mikjl", "miljk", "mjkil", "mjlik", "mklij"):
            out -= np.einsum(f"{spec}->mijkl", C)
        for spec in ("mijkl", "mikjl", "miljk"):
            out += np.einsum(f"{spec}->mijkl", E)
        return out
    raise ValueError(f"derivative order must be in 0..{MAX_ORDER}, got {order}")
