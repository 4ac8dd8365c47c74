"""3-d Helmholtz equation with a product-of-sines manufactured solution.

    Δu + k² u = q  on [-1, 1]³,   u = 0 on the boundary
    u = sin(a1 π x1) sin(a2 π x2) sin(a3 π x3)
"""

import numpy as np

from .base import Domain, PdeProblem, face_conditions, full, required_terms, value_quantities, value_terms

K = 1.0
A = (4.0, 4.0, 3.0)
NAMES = ("x1", "x2", "x3")
DOMAIN = Domain(((-1.0, 1.0),) * 3, NAMES)


def exact(mesh, a=A):
    x1, x2, x3 = mesh
    return full(mesh, np.sin(a[0] * np.pi * x1) * np.sin(a[1] * np.pi * x2) * np.sin(a[2] * np.pi * x3))


def source(mesh, k=K, a=A):
    u = exact(mesh, a)
    return -((a[0] * np.pi) ** 2) * u - (a[1] * np.pi) ** 2 * u - (a[2] * np.pi) ** 2 * u + k**2 * u


def residual_helmholtz(g, mesh, k=K, a=A):
    lap = g(x1=2) + g(x2=2) + g(x3=2)
    return {"pde": lap + (k**2) * g() - source(mesh, k, a)}


def _zero(mesh):
    return [full(mesh, 0.0)]


def make_problem():
    return PdeProblem(
        id="helmholtz3d",
        domain=DOMAIN,
        out_dim=1,
        residual=residual_helmholtz,
        terms=required_terms(residual_helmholtz, NAMES, [np.zeros((1, 1, 1))] * 3),
        conditions=tuple(face_conditions(DOMAIN, value_terms(NAMES), value_quantities(), _zero)),
        exact=exact,
        reference=exact,
        eval_resolution=64,
        default_counts=32,
        description="Helmholtz, k=1, a=(4,4,3), zero Dirichlet boundary",
    )
