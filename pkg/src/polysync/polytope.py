"""Vertex-represented vector and matrix polytopes.

Everything here is in V-representation: a polytope is the convex hull of an
explicit, possibly redundant, vertex list. That matches how every set in the
noise model and the data-consistency analysis is generated, and it keeps the
algebra (affine images, Minkowski sums, norm bounds) to plain array ops.

Vertex counts can grow geometrically under repeated sums/images, so
:func:`prune_vertices` offers redundancy removal with a hard cap and an
axis-aligned bounding-box fallback. The fallback only ever enlarges the set,
so containment guarantees survive pruning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .errors import ShapeError, SizeError
from .numkit import as_matrix, as_vector

MAX_BOX_DIM = 12  # 2**12 vertices is the largest box this module will enumerate
DEFAULT_VERTEX_CAP = 64
DEFAULT_MEMBER_TOL = 1e-8


@dataclass(frozen=True)
class VPolytope:
    """Convex hull of row vectors ``vertices[(k, :)]``."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ShapeError(f"vertex array must be (n_vertices, dim), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("polytope vertices must be finite")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)


@dataclass(frozen=True)
class MatrixPolytope:
    """Convex hull of matrices ``vertices[(k, :, :)]``, all of one shape."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 2:
            v = v[None, :, :]
        if v.ndim != 3 or v.shape[0] < 1 or v.shape[1] < 1 or v.shape[2] < 1:
            raise ShapeError(f"vertex array must be (n_vertices, rows, cols), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("polytope vertices must be finite")
        object.__setattr__(self, "vertices", v)

    @property
    def rows(self) -> int:
        return self.vertices.shape[1]

    @property
    def cols(self) -> int:
        return self.vertices.shape[2]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)


def singleton(point) -> VPolytope:
    """The one-point polytope {point}."""
    return VPolytope(np.atleast_2d(as_vector(point)))


def box_polytope(half_widths) -> VPolytope:
    """Hypercube with the given positive per-coordinate half widths.

    Vertices enumerate all sign patterns, most significant coordinate first
    and ``+`` before ``-``, so dim-2 gives (+,+), (+,-), (-,+), (-,-).
    """
    h = as_vector(half_widths, "half_widths")
    if np.any(h <= 0):
        raise ValueError("half_widths must be positive componentwise")
    d = h.size
    if d > MAX_BOX_DIM:
        raise SizeError(f"box dimension {d} exceeds {MAX_BOX_DIM} (2^dim vertex explosion)")
    # k-th vertex: binary digits of k, 0 -> +1, 1 -> -1.
    idx = np.arange(2**d)
    bits = (idx[:, None] >> np.arange(d - 1, -1, -1)[None, :]) & 1
    signs = 1.0 - 2.0 * bits
    return VPolytope(signs * h[None, :])


def noise_vertex_matrix(vertex: np.ndarray, column: int, horizon: int) -> np.ndarray:
    """Matrix with ``vertex`` in the given column and zeros elsewhere."""
    v = as_vector(vertex)
    out = np.zeros((v.size, horizon))
    out[:, column] = v
    return out


def noise_matrix_polytope(p: VPolytope, horizon: int, mode: str = "verbatim") -> MatrixPolytope:
    """Concatenate a per-step noise polytope into a horizon-length matrix polytope.

    Vertex ``m + k*horizon`` places the k-th vertex of ``p`` into column m.
    ``mode="verbatim"`` keeps the vertices as stated; ``mode="scaled"``
    multiplies them by ``horizon`` so the hull also covers matrices whose
    columns sit at vertices simultaneously and independently.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if mode not in ("verbatim", "scaled"):
        raise ValueError(f"mode must be 'verbatim' or 'scaled', got {mode!r}")
    gamma, dim = p.n_vertices, p.dim
    scale = float(horizon) if mode == "scaled" else 1.0
    out = np.zeros((gamma * horizon, dim, horizon))
    cols = np.arange(horizon)
    for k in range(gamma):
        out[k * horizon + cols, :, cols] = scale * p.vertices[k]
    return MatrixPolytope(out)


def map_matrix_polytope(mp: MatrixPolytope, right=None, left=None, shift=None) -> MatrixPolytope:
    """Affine image ``{left @ V @ right + shift}`` applied vertex by vertex."""
    v = mp.vertices
    if left is not None:
        lm = as_matrix(left, "left")
        if lm.shape[1] != mp.rows:
            raise ShapeError(f"left has {lm.shape[1]} cols, polytope has {mp.rows} rows")
        v = np.einsum("ij,kjl->kil", lm, v)
    if right is not None:
        rm = as_matrix(right, "right")
        if rm.shape[0] != v.shape[2]:
            raise ShapeError(f"right has {rm.shape[0]} rows, polytope has {v.shape[2]} cols")
        v = v @ rm
    if shift is not None:
        sm = as_matrix(shift, "shift")
        if sm.shape != v.shape[1:]:
            raise ShapeError(f"shift shape {sm.shape} != image shape {v.shape[1:]}")
        v = v + sm[None, :, :]
    return MatrixPolytope(v)


def minkowski_sum(a: VPolytope, b: VPolytope) -> VPolytope:
    """Pairwise vertex sums; may list redundant vertices of the true sum."""
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sums = a.vertices[:, None, :] + b.vertices[None, :, :]
    return VPolytope(sums.reshape(-1, a.dim))


def add_point(a: VPolytope, x) -> VPolytope:
    """Translate the polytope by a fixed point."""
    xv = as_vector(x)
    if xv.size != a.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {xv.size}")
    return VPolytope(a.vertices + xv[None, :])


def map_vpolytope(a: VPolytope, m) -> VPolytope:
    """Linear image ``{m @ v}`` of a vector polytope."""
    mm = as_matrix(m)
    if mm.shape[1] != a.dim:
        raise ShapeError(f"map has {mm.shape[1]} cols, polytope dim is {a.dim}")
    return VPolytope(a.vertices @ mm.T)


def max_vertex_norm(p, norm: str = "frobenius") -> float:
    """Max of the chosen norm over vertices; bounds every hull member by convexity."""
    if isinstance(p, VPolytope):
        if norm in ("frobenius", "two"):
            vals = np.linalg.norm(p.vertices, axis=1)
        elif norm == "inf":
            vals = np.max(np.abs(p.vertices), axis=1)
        else:
            raise ValueError(f"unknown norm {norm!r}")
    elif isinstance(p, MatrixPolytope):
        if norm == "frobenius":
            vals = np.linalg.norm(p.vertices, axis=(1, 2))
        elif norm == "two":
            vals = np.array([np.linalg.norm(v, ord=2) for v in p.vertices])
        elif norm == "inf":
            vals = np.array([np.linalg.norm(v, ord=np.inf) for v in p.vertices])
        else:
            raise ValueError(f"unknown norm {norm!r}")
    else:
        raise TypeError(f"expected VPolytope or MatrixPolytope, got {type(p)!r}")
    return float(np.max(vals))


def contains(p: VPolytope, x, tol: float = DEFAULT_MEMBER_TOL) -> bool:
    """Hull membership test.

    Solves a nonnegative least-squares problem for convex weights with the
    simplex constraint appended as a heavily weighted row, then checks the
    reconstruction error in the infinity norm.
    """
    xv = as_vector(x)
    if xv.size != p.dim:
        raise ShapeError(f"dimension mismatch: {p.dim} vs {xv.size}")
    scale = max(1.0, float(np.max(np.abs(p.vertices))), float(np.max(np.abs(xv))))
    w = 1e4 * scale
    a = np.vstack([p.vertices.T, w * np.ones((1, p.n_vertices))])
    b = np.concatenate([xv, [w]])
    beta, _ = nnls(a, b)
    if abs(beta.sum() - 1.0) > max(tol, 1e-9):
        return False
    return bool(np.max(np.abs(p.vertices.T @ beta - xv)) <= tol)


def _drop_redundant(vertices: np.ndarray, tol: float) -> np.ndarray:
    """Greedily drop vertices expressible as convex combinations of the rest."""
    keep = list(range(vertices.shape[0]))
    i = 0
    while i < len(keep) and len(keep) > 1:
        others = keep[:i] + keep[i + 1 :]
        if contains(VPolytope(vertices[others]), vertices[keep[i]], tol):
            keep.pop(i)
        else:
            i += 1
    return vertices[keep]


def bounding_box(p: VPolytope) -> VPolytope:
    """Axis-aligned bounding box of the vertex set (over-approximation)."""
    lo = p.vertices.min(axis=0)
    hi = p.vertices.max(axis=0)
    d = p.dim
    if d > MAX_BOX_DIM:
        raise SizeError(f"cannot enumerate a box in dimension {d} > {MAX_BOX_DIM}")
    idx = np.arange(2**d)
    bits = (idx[:, None] >> np.arange(d - 1, -1, -1)[None, :]) & 1
    return VPolytope(np.where(bits == 0, hi[None, :], lo[None, :]))


def prune_vertices(p: VPolytope, cap: int = DEFAULT_VERTEX_CAP, tol: float = 1e-9) -> VPolytope:
    """Reduce the vertex list, falling back to the bounding box over the cap.

    Exact duplicates are removed first; below the cap, vertices inside the
    hull of the others are dropped. The result always contains ``p``.
    """
    v = np.unique(p.vertices, axis=0)
    q = VPolytope(v)
    if q.n_vertices <= cap:
        return VPolytope(_drop_redundant(q.vertices, tol)) if q.n_vertices > 2 else q
    box = bounding_box(q)
    if box.n_vertices > cap:
        # A box in dim <= MAX_BOX_DIM with cap >= 2**dim is the expected regime.
        raise SizeError(
            f"bounding-box fallback still exceeds the cap ({box.n_vertices} > {cap})"
        )
    return box
