"""Regenerate the bundled synthetic survey-style extracts.

Both files are simulated.  They only mimic the layout and rough scale of a
galaxy-redshift slice and a regional earthquake catalogue so the CLI
protocol can be exercised offline.

    python3 scripts/make_extracts.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from filaments.io import write_csv
from filaments.rng import stream

DATA = Path(__file__).resolve().parents[1] / "src" / "filaments" / "data"
SEED = 20130930


def _along(P: np.ndarray, n: int, rng) -> np.ndarray:
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = rng.uniform(0, s[-1], n)
    return np.column_stack([np.interp(t, s, P[:, k]) for k in range(P.shape[1])])


def galaxies(in_slice: int = 2532, out_slice: int = 5064):
    """(ra, dec, z) rows: a web of filaments between clusters plus a uniform background."""
    rng = stream(SEED, "galaxies")
    nodes = np.column_stack([rng.uniform(143, 167, 9), rng.uniform(3, 27, 9)])
    edges = set()
    for i, p in enumerate(nodes):
        near = np.argsort(np.linalg.norm(nodes - p, axis=1))[1:3]
        edges.update(tuple(sorted((i, int(j)))) for j in near)
    edges = sorted(edges)

    def draw(n):
        k_fil, k_clu = int(0.6 * n), int(0.25 * n)
        fil = []
        per = np.bincount(rng.integers(0, len(edges), k_fil), minlength=len(edges))
        for (i, j), m in zip(edges, per):
            mid = 0.5 * (nodes[i] + nodes[j]) + rng.normal(0, 1.5, 2)
            fil.append(_along(np.array([nodes[i], mid, nodes[j]]), m, rng))
        fil = np.vstack(fil) + rng.normal(0, 0.5, (k_fil, 2))
        clu = nodes[rng.integers(0, len(nodes), k_clu)] + rng.normal(0, 0.9, (k_clu, 2))
        bg = np.column_stack([rng.uniform(138, 172, n - k_fil - k_clu), rng.uniform(-2, 32, n - k_fil - k_clu)])
        return np.vstack([fil, clu, bg])

    inside = draw(in_slice)
    z_in = rng.uniform(0.045, 0.050, in_slice)
    outside = draw(out_slice)
    z_out = np.where(rng.uniform(size=out_slice) < 0.5, rng.uniform(0.038, 0.04499, out_slice),
                     rng.uniform(0.05001, 0.057, out_slice))
    P = np.vstack([inside, outside])
    z = np.concatenate([z_in, z_out])
    order = rng.permutation(P.shape[0])
    P, z = np.round(P[order], 5), np.round(z[order], 6)
    write_csv(DATA / "sdss_extract.csv", ["ra", "dec", "z"], [P[:, 0], P[:, 1], z])


def earthquakes(n: int = 1169):
    """(latitude, longitude, depth, mag) rows along arc-shaped boundaries."""
    rng = stream(SEED, "earthquakes")
    arcs = [
        np.array([[146.0, 44.0], [143.5, 40.0], [142.5, 36.0], [141.0, 33.0]]),   # northern trench
        np.array([[141.0, 33.0], [140.5, 29.0], [142.0, 24.0], [144.5, 18.0], [146.5, 13.0]]),
        np.array([[138.0, 33.5], [132.0, 31.0], [128.0, 27.5], [123.5, 24.0]]),   # island arc
        np.array([[121.5, 23.0], [122.5, 18.0], [126.0, 12.0], [126.5, 7.0]]),
        np.array([[146.0, 44.0], [151.0, 46.5], [156.0, 50.0], [158.5, 53.5]]),
    ]
    weights = np.array([0.24, 0.22, 0.18, 0.22, 0.14])
    counts = np.bincount(rng.choice(len(arcs), n, p=weights), minlength=len(arcs))
    P = np.vstack([_along(a, c, rng) for a, c in zip(arcs, counts)])
    P += rng.normal(0, 0.6, P.shape)
    depth = np.round(rng.gamma(2.0, 25.0, n), 1)
    mag = np.round(4.0 + rng.exponential(0.45, n), 1)
    order = rng.permutation(n)
    P = np.round(P[order], 4)
    write_csv(DATA / "earthquake_extract.csv", ["latitude", "longitude", "depth", "mag"],
              [P[:, 1], P[:, 0], depth[order], mag[order]])


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    galaxies()
    earthquakes()
