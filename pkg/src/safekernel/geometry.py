"""Convex hulls, safe kernels and membership queries in R^d.

Point sets are ``(m, d)`` float arrays. Polytopes carry both a vertex list
and a halfspace list ``{x : a.x <= b}`` with unit normals. Everything here is
brute force on purpose: facets come from d-point subsets, kernel vertices
from d-constraint intersections. That is cheap at the sizes a single agent
sees (a dozen neighbours, d <= 3) and has no general-position assumptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Iterator, Sequence

import numpy as np

TOL_GEOM = 1e-9
TOL_VERTEX = 1e-7

# below this |det| a d-constraint system is treated as singular
_SINGULAR = 1e-12


class GeometryError(ValueError):
    """Invalid geometric input (empty set, bad dimension, bad count)."""


@dataclass(frozen=True)
class Halfspace:
    normal: tuple[float, ...]
    offset: float

    def as_dict(self) -> dict:
        return {"normal": list(self.normal), "offset": self.offset}


@dataclass
class Polytope:
    """Bounded convex polytope in both V- and H-representation.

    ``normals``/``offsets`` hold the H-rep as arrays; ``halfspaces`` gives the
    same constraints as :class:`Halfspace` objects. ``full_dimensional`` is
    False for hulls/kernels of lower affine dimension, in which case the
    H-rep contains opposing pairs pinning the missing directions.
    """

    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    dim: int
    empty: bool = False
    full_dimensional: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def halfspaces(self) -> list[Halfspace]:
        return [
            Halfspace(tuple(float(v) for v in a), float(b))
            for a, b in zip(self.normals, self.offsets)
        ]

    @property
    def n_vertices(self) -> int:
        return 0 if self.empty else len(self.vertices)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "empty": bool(self.empty),
            "full_dimensional": bool(self.full_dimensional),
            "vertices": [[float(v) for v in p] for p in self.vertices],
            "halfspaces": [h.as_dict() for h in self.halfspaces],
        }


def as_points(points, dim: int | None = None) -> np.ndarray:
    """Coerce to a finite ``(m, d)`` float array; scalars become d=1."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise GeometryError(f"expected a 2-D point array, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise GeometryError("points must have dimension >= 1")
    if dim is not None and arr.shape[1] != dim:
        raise GeometryError(f"expected dimension {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("points must be finite")
    return arr


def sort_lex(points: np.ndarray) -> np.ndarray:
    if len(points) == 0:
        return points
    order = np.lexsort(points.T[::-1])
    return points[order]


def _greedy_keep(close: np.ndarray) -> np.ndarray:
    """Indices kept by a first-occurrence greedy pass over a closeness matrix."""
    kept = np.zeros(len(close), dtype=bool)
    for i in range(len(close)):
        kept[i] = not close[i, :i][kept[:i]].any()
    return np.flatnonzero(kept)


def _close(points: np.ndarray, tol: float) -> np.ndarray:
    return np.max(np.abs(points[:, None, :] - points[None, :, :]), axis=2) <= tol


def dedupe(points: np.ndarray, tol: float = TOL_VERTEX) -> np.ndarray:
    """Greedy merge of points closer than ``tol``; first occurrence wins."""
    if len(points) == 0:
        return np.empty((0, points.shape[1]))
    return points[_greedy_keep(_close(points, tol))]


def canonicalize(points: np.ndarray, tol: float = TOL_VERTEX) -> np.ndarray:
    """Snap each point onto the first earlier point within ``tol``.

    Keeps the multiset cardinality; only coordinates change, so near-duplicates
    become exact duplicates consistently across every subset built later.
    """
    if len(points) == 0:
        return points.copy()
    close = _close(points, tol)
    reps = _greedy_keep(close)
    # first representative within tol; every point has one (possibly itself)
    owner = reps[np.argmax(close[:, reps], axis=1)]
    return points[owner]


def enumerate_subsets(points, n: int) -> Iterator[np.ndarray]:
    """Yield every sub-multiset of ``points`` obtained by removing ``n`` slots.

    Duplicate points are separate slots, so exactly C(m, n) sets come out.
    """
    pts = as_points(points)
    m = len(pts)
    if n < 0 or n > m:
        raise GeometryError(f"cannot remove {n} of {m} points")
    for removed in combinations(range(m), n):
        keep = np.ones(m, dtype=bool)
        keep[list(removed)] = False
        yield pts[keep]


def _dedupe_planes(normals: np.ndarray, offsets: np.ndarray, tol: float):
    d = normals.shape[1] if normals.ndim == 2 else 0
    if len(normals) == 0:
        return np.empty((0, d)), np.empty(0)
    same_a = _close(normals, tol)
    btol = tol * np.maximum(1.0, np.abs(offsets))
    same_b = np.abs(offsets[:, None] - offsets[None, :]) <= btol[:, None]
    keep = _greedy_keep(same_a & same_b)
    return normals[keep], offsets[keep].astype(float)


def _full_dim_facets(pts: np.ndarray, tol: float):
    """Facet hyperplanes of a full-dimensional point cloud (d >= 2)."""
    k, d = pts.shape
    idx = np.array(list(combinations(range(k), d)))
    # anchor each plane at its member nearest the origin: offsets stay exact
    # near the origin even when the other members are far away
    near = np.argmin(np.linalg.norm(pts[idx], axis=2), axis=1)
    idx[np.arange(len(idx)), 0], idx[np.arange(len(idx)), near] = (
        idx[np.arange(len(idx)), near],
        idx[np.arange(len(idx)), 0],
    )
    base = pts[idx[:, 0]]
    diffs = pts[idx[:, 1:]] - base[:, None, :]
    _, s, vh = np.linalg.svd(diffs)
    ok = s[:, -1] > tol
    normals = vh[ok, -1, :]
    base = base[ok]
    rel = pts[None, :, :] - base[:, None, :]
    side = np.einsum("cd,ckd->ck", normals, rel)
    slack = tol * np.maximum(1.0, np.linalg.norm(rel, axis=2))
    below = np.all(side <= slack, axis=1)
    above = np.all(side >= -slack, axis=1)
    normals = np.where(above[:, None] & ~below[:, None], -normals, normals)
    keep = below | above
    normals = normals[keep]
    offsets = np.einsum("cd,cd->c", normals, base[keep])
    return _dedupe_planes(normals, offsets, tol * 10)


def _full_dim_hull(pts: np.ndarray, tol: float):
    """Return (vertex mask, normals, offsets) for a full-dimensional cloud."""
    d = pts.shape[1]
    if d == 1:
        lo, hi = int(np.argmin(pts[:, 0])), int(np.argmax(pts[:, 0]))
        mask = np.zeros(len(pts), dtype=bool)
        mask[[lo, hi]] = True
        normals = np.array([[1.0], [-1.0]])
        offsets = np.array([pts[hi, 0], -pts[lo, 0]])
        return mask, normals, offsets
    normals, offsets = _full_dim_facets(pts, tol)
    resid = pts @ normals.T - offsets[None, :]
    slack = tol * np.maximum(1.0, np.abs(offsets))[None, :] * 10
    active = np.abs(resid) <= slack
    mask = np.zeros(len(pts), dtype=bool)
    for i, row in enumerate(active):
        if not row.any():
            continue
        # a vertex is the strict maximiser of the summed active normals; this
        # survives sliver apexes whose facet normals are nearly antiparallel
        c = normals[row].sum(axis=0)
        norm = np.linalg.norm(c)
        if norm == 0.0:
            continue
        rel = pts[i] - np.delete(pts, i, axis=0)
        gap = rel @ (c / norm)
        mask[i] = bool(np.all(gap > tol * np.maximum(1.0, np.linalg.norm(rel, axis=1))))
    return mask, normals, offsets


def convex_hull(points, tol: float = TOL_GEOM, tol_vertex: float = TOL_VERTEX) -> Polytope:
    """Convex hull of a finite point set, in both representations.

    Lower-dimensional inputs are handled by building the hull inside their
    affine span and pinning each orthogonal direction with a pair of
    opposing halfspaces.
    """
    pts = as_points(points)
    if len(pts) == 0:
        raise GeometryError("convex hull of an empty set")
    d = pts.shape[1]
    uniq = dedupe(pts, tol_vertex)
    centre = uniq.mean(axis=0)
    centred = uniq - centre
    _, s, vh = np.linalg.svd(centred, full_matrices=True)
    # flat means every point is within about tol_vertex of a lower affine span
    rank = int(np.sum(s > tol_vertex)) if len(uniq) > 1 else 0

    if rank == d:
        mask, normals, offsets = _full_dim_hull(uniq, tol)
        verts = uniq[mask]
        full = True
    else:
        basis = vh[:rank].T  # d x rank
        ortho = vh[rank:]  # (d - rank) x d
        if rank == 0:
            mask = np.zeros(len(uniq), dtype=bool)
            mask[0] = True
            sub_normals = np.empty((0, d))
            sub_offsets = np.empty(0)
            ortho = np.eye(d)
        else:
            local = centred @ basis
            mask, ln, lo = _full_dim_hull(local, tol)
            sub_normals = ln @ basis.T
            sub_offsets = lo + sub_normals @ centre
        # slab just wide enough to hold every input point
        proj = uniq @ ortho.T
        normals = np.vstack([sub_normals, ortho, -ortho])
        offsets = np.concatenate([sub_offsets, proj.max(axis=0), -proj.min(axis=0)])
        verts = uniq[mask]
        full = False
    return Polytope(
        vertices=sort_lex(verts),
        normals=normals,
        offsets=offsets,
        dim=d,
        full_dimensional=full,
    )


def _constraint_slack(normals, offsets, x, tol):
    return tol * np.maximum(1.0, np.maximum(np.abs(offsets), np.linalg.norm(x)))


def enumerate_vertices(
    normals: np.ndarray,
    offsets: np.ndarray,
    tol: float = TOL_GEOM,
    tol_vertex: float = TOL_VERTEX,
) -> np.ndarray:
    """Vertices of ``{x : normals @ x <= offsets}`` by d-subset intersection.

    Every choice of d constraint boundaries with a nonsingular system is
    solved; the solution is kept if it satisfies all constraints within
    ``tol``. Results are merged within ``tol_vertex`` and sorted.
    """
    h, d = normals.shape
    if h < d:
        return np.empty((0, d))
    idx = np.array(list(combinations(range(h), d)))
    mats = normals[idx]
    rhs = offsets[idx]
    dets = np.linalg.det(mats)
    good = np.abs(dets) > _SINGULAR
    if not good.any():
        return np.empty((0, d))
    sols = np.linalg.solve(mats[good], rhs[good][..., None])[..., 0]
    resid = sols @ normals.T - offsets[None, :]
    slack = tol * np.maximum(
        1.0, np.maximum(np.abs(offsets)[None, :], np.linalg.norm(sols, axis=1)[:, None])
    )
    feasible = np.all(resid <= slack, axis=1)
    cand = sols[feasible]
    if len(cand) == 0:
        return np.empty((0, d))
    return sort_lex(dedupe(sort_lex(cand), tol_vertex))


def _same_vertices(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    if a.shape != b.shape:
        return False
    return bool(np.all(np.abs(a - b) <= tol))


def is_bounded(normals: np.ndarray, tol: float = TOL_GEOM) -> bool:
    """True iff ``{u : normals @ u <= 0}`` is just the origin."""
    d = normals.shape[1]
    eye = np.eye(d)
    probe_normals = np.vstack([normals, eye, -eye])
    probe_offsets = np.concatenate([np.zeros(len(normals)), np.ones(2 * d)])
    verts = enumerate_vertices(probe_normals, probe_offsets, tol, tol)
    return bool(np.all(np.abs(verts) <= 1e-6))


def prune_halfspaces(
    normals: np.ndarray,
    offsets: np.ndarray,
    vertices: np.ndarray,
    tol: float = TOL_GEOM,
    tol_vertex: float = TOL_VERTEX,
):
    """Drop constraints whose removal leaves the vertex set unchanged.

    A removal that would make the set unbounded is refused even when the
    vertex list survives (a cone keeps its apex).
    """
    if len(vertices) == 0:
        return normals, offsets
    resid = vertices @ normals.T - offsets[None, :]
    active = np.any(np.abs(resid) <= 10 * tol * np.maximum(1.0, np.abs(offsets)), axis=0)
    normals, offsets = normals[active], offsets[active]
    keep = np.ones(len(normals), dtype=bool)
    for i in range(len(normals)):
        trial = keep.copy()
        trial[i] = False
        if trial.sum() < normals.shape[1] + 1:
            continue
        verts = enumerate_vertices(normals[trial], offsets[trial], tol, tol_vertex)
        if _same_vertices(verts, vertices, tol_vertex * 10) and is_bounded(normals[trial]):
            keep = trial
    return normals[keep], offsets[keep]


def safe_kernel(
    points,
    n: int,
    tol: float = TOL_GEOM,
    tol_vertex: float = TOL_VERTEX,
    prune: bool = True,
) -> Polytope:
    """Intersection of the hulls of every (m - n)-point sub-multiset.

    An empty intersection is a valid result and comes back with
    ``empty=True``. ``prune=False`` skips redundant-constraint removal, which
    only affects the H-rep, not the vertices.
    """
    raw = as_points(points)
    pts = raw
    m, d = pts.shape
    if m == 0:
        raise GeometryError("safe kernel of an empty set")
    if n < 0 or n > m:
        raise GeometryError(f"cannot remove {n} of {m} points")
    if n == m:
        raise GeometryError("removing every point leaves nothing to intersect")
    pts = canonicalize(pts, tol_vertex)
    # work around the coordinate-wise median, which sits inside the trimmed
    # box and therefore next to the kernel
    ref = np.median(pts, axis=0)
    pts = pts - ref
    all_normals, all_offsets = [], []
    for subset in enumerate_subsets(pts, n):
        hull = convex_hull(subset, tol, tol_vertex)
        all_normals.append(hull.normals)
        all_offsets.append(hull.offsets)
    normals, offsets = _dedupe_planes(
        np.vstack(all_normals), np.concatenate(all_offsets), tol * 10
    )
    verts = enumerate_vertices(normals, offsets, tol, tol_vertex)
    n_subsets = comb(m, n)
    if len(verts) == 0:
        return Polytope(
            vertices=np.empty((0, d)),
            normals=normals,
            offsets=offsets + normals @ ref,
            dim=d,
            empty=True,
            full_dimensional=False,
            meta={"subsets": n_subsets},
        )
    if prune:
        normals, offsets = prune_halfspaces(normals, offsets, verts, tol, tol_vertex)
    full = _affine_rank(verts, tol_vertex) == d
    return Polytope(
        vertices=sort_lex(_snap_to_inputs(verts + ref, raw, tol_vertex)),
        normals=normals,
        offsets=offsets + normals @ ref,
        dim=d,
        full_dimensional=full,
        meta={"subsets": n_subsets},
    )


def _snap_to_inputs(verts: np.ndarray, raw: np.ndarray, tol: float) -> np.ndarray:
    # kernel vertices often are input points (always, in one dimension); hand
    # those back bit-exact instead of after a shift round trip
    dist = np.max(np.abs(verts[:, None, :] - raw[None, :, :]), axis=2)
    near = np.argmin(dist, axis=1)
    hit = dist[np.arange(len(verts)), near] <= tol * np.maximum(1.0, np.abs(verts).max(axis=1))
    out = verts.copy()
    out[hit] = raw[near[hit]]
    return out


def _affine_rank(verts: np.ndarray, tol: float) -> int:
    if len(verts) <= 1:
        return 0
    s = np.linalg.svd(verts - verts[0], compute_uv=False)
    return int(np.sum(s > tol))


def contains(poly: Polytope, y, tol: float = TOL_GEOM) -> bool:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != poly.dim:
        raise GeometryError(f"point has dimension {y.shape[0]}, polytope {poly.dim}")
    if poly.empty:
        return False
    return bool(np.all(poly.normals @ y <= poly.offsets + tol))


def margin(poly: Polytope, ys) -> np.ndarray:
    """Largest constraint violation ``max(a.y - b)`` for each row of ``ys``."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    return np.max(ys @ poly.normals.T - poly.offsets[None, :], axis=1)


def kernel_guaranteed_nonempty(m: int, n: int, d: int) -> bool:
    """Helly bound: ``m >= n(d+1)+1`` forces a nonempty kernel."""
    return m >= n * (d + 1) + 1


def trimmed_box(points, n: int) -> Polytope:
    """Axis-aligned box from the (n+1)-th smallest/largest value per coordinate."""
    pts = as_points(points)
    m, d = pts.shape
    if m < 2 * n + 1:
        raise GeometryError(f"trimmed box needs m >= 2n+1 (m={m}, n={n})")
    srt = np.sort(pts, axis=0)
    lo, hi = srt[n], srt[m - n - 1]
    eye = np.eye(d)
    normals = np.vstack([eye, -eye])
    offsets = np.concatenate([hi, -lo])
    corners = np.array(
        [[hi[p] if (c >> p) & 1 else lo[p] for p in range(d)] for c in range(2**d)]
    )
    verts = sort_lex(dedupe(corners, 0.0))
    return Polytope(
        vertices=verts,
        normals=normals,
        offsets=offsets,
        dim=d,
        full_dimensional=bool(np.all(hi > lo)),
    )


def boundary_order(verts: Sequence) -> np.ndarray:
    """Order 2-D vertices counter-clockwise (for plotting closed outlines)."""
    v = np.asarray(verts, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        return v
    c = v.mean(axis=0)
    ang = np.arctan2(v[:, 1] - c[1], v[:, 0] - c[0])
    return v[np.argsort(ang, kind="stable")]
