"""Poisson equation on the L-shaped domain [-1, 1]² minus (0, 1]².

    -Δu = 1 inside,  u = 0 on the boundary

Collocation uses factorized samples over the bounding box with the residual
masked outside the L; boundary points are scattered along the six edges and
merged pointwise.  There is no closed form, so evaluation compares against a
five-point finite-difference solution.
"""

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .base import Domain, PdeProblem, PointCondition, grid_shape, required_terms, value_quantities, value_terms

NAMES = ("x", "y")
DOMAIN = Domain(((-1.0, 1.0), (-1.0, 1.0)), NAMES)
EDGE_POINTS = 256
FD_NODES = 201

# (fixed axis, fixed value, free-axis interval)
EDGES = (
    (0, -1.0, (-1.0, 1.0)),
    (1, -1.0, (-1.0, 1.0)),
    (0, 1.0, (-1.0, 0.0)),
    (1, 1.0, (-1.0, 0.0)),
    (0, 0.0, (0.0, 1.0)),
    (1, 0.0, (0.0, 1.0)),
)


def inside(x, y):
    """Closed L-shape membership (boundary included)."""
    return np.logical_not((np.asarray(x) > 0) & (np.asarray(y) > 0))


def mask(mesh):
    x, y = mesh
    return np.broadcast_to(inside(x, y), grid_shape(mesh))


def residual_poisson_lshape(g, mesh):
    m = mask(mesh).astype(np.float64)
    return {"pde": (-(g(x=2) + g(y=2)) - 1.0) * m}


def sample_edges(rng, n=EDGE_POINTS):
    pts = []
    for axis, value, (lo, hi) in EDGES:
        free = rng.uniform(lo, hi, size=n)
        fixed = np.full(n, value)
        pts.append(np.stack([fixed, free] if axis == 0 else [free, fixed], axis=1))
    return np.concatenate(pts)


def _zero_target(points):
    return [np.zeros(points.shape[0])]


@lru_cache(maxsize=4)
def fd_reference(n=FD_NODES):
    """Five-point finite-difference solution on an n x n grid over the box.

    Nodes outside the closed L and on its boundary hold 0.  Returns the node
    coordinates and the (n, n) solution, indexed [x, y].
    """
    xs = np.linspace(-1.0, 1.0, n)
    h = xs[1] - xs[0]
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    interior = inside(X, Y) & (np.abs(X) < 1) & (np.abs(Y) < 1) & ~((X >= 0) & (Y >= 0))
    idx = -np.ones((n, n), dtype=np.int64)
    idx[interior] = np.arange(interior.sum())
    rows, cols, vals = [], [], []
    I, Jn = np.nonzero(interior)
    k = idx[I, Jn]
    rows.append(k)
    cols.append(k)
    vals.append(np.full(k.size, 4.0 / h**2))
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = idx[I + di, Jn + dj]
        ok = nb >= 0
        rows.append(k[ok])
        cols.append(nb[ok])
        vals.append(np.full(ok.sum(), -1.0 / h**2))
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(k.size, k.size))
    u = np.zeros((n, n))
    u[interior] = spla.spsolve(A.tocsc(), np.ones(k.size))
    u.setflags(write=False)
    return xs, u


def reference(mesh):
    """FD solution on a uniform grid whose nodes are FD nodes.

    Valid resolutions n satisfy ``(FD_NODES - 1) % (n - 1) == 0``
    (201, 101, 51, 41, 26, ...); the FD field is subsampled, not interpolated.
    """
    x, y = mesh
    xs, u = fd_reference(FD_NODES)
    n = x.size
    stride = (FD_NODES - 1) // (n - 1) if n > 1 else 0
    if n < 2 or y.size != n or stride * (n - 1) != FD_NODES - 1 or not np.allclose(x.reshape(-1), xs[::stride]):
        raise ValueError(f"the Poisson reference needs a uniform grid whose nodes are a subset of the {FD_NODES}-node FD grid")
    return u[::stride, ::stride]


def make_problem():
    return PdeProblem(
        id="poisson_lshape",
        domain=DOMAIN,
        out_dim=1,
        residual=residual_poisson_lshape,
        terms=required_terms(residual_poisson_lshape, NAMES, [np.zeros((1, 1))] * 2),
        point_conditions=(
            PointCondition("bc", sample_edges, _zero_target, value_terms(NAMES), value_quantities()),
        ),
        reference=reference,
        mask=mask,
        eval_resolution=FD_NODES,
        default_counts=64,
        description="Poisson on an L-shaped domain (masked bounding box)",
    )
