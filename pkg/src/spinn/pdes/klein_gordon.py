"""Inhomogeneous Klein-Gordon equation in (2+1)-d and (3+1)-d.

    u_tt - Δu + u² = f,   t in [0, 10], x in [-1, 1]^n
    (2+1)-d:  u = (x1 + x2) cos(2t) + x1 x2 sin(2t)
    (3+1)-d:  u = (x1 + x2 + x3) cos(t) + x1 x2 x3 sin(t)

Both solutions are harmonic in space, so f = u_tt + u² in closed form.
"""

import numpy as np

from .base import Condition, Domain, PdeProblem, exact_target, face_conditions, full, required_terms, value_quantities, value_terms


def exact_3d(mesh):
    t, x1, x2 = mesh
    return full(mesh, (x1 + x2) * np.cos(2 * t) + x1 * x2 * np.sin(2 * t))


def exact_4d(mesh):
    t, x1, x2, x3 = mesh
    return full(mesh, (x1 + x2 + x3) * np.cos(t) + x1 * x2 * x3 * np.sin(t))


def source_3d(mesh):
    u = exact_3d(mesh)
    return -4.0 * u + u * u


def source_4d(mesh):
    u = exact_4d(mesh)
    return -u + u * u


def residual_klein_gordon(g, mesh):
    """u_tt - Δu + u² - f over however many spatial axes the mesh has."""
    spatial = len(mesh) - 1
    f = source_3d(mesh) if spatial == 2 else source_4d(mesh)
    u = g()
    lap = g(x1=2) + g(x2=2)
    if spatial == 3:
        lap = lap + g(x3=2)
    return {"pde": g(t=2) - lap + u * u - f}


def _make(pid, names, exact, res):
    domain = Domain(((0.0, 10.0),) + ((-1.0, 1.0),) * (len(names) - 1), names, time_axis=0)
    vt = value_terms(names)
    conds = [Condition("ic", 0, "lo", vt, value_quantities(), exact_target(exact))]
    conds += face_conditions(domain, vt, value_quantities(), exact_target(exact))
    mesh = [np.zeros((1,) * len(names))] * len(names)
    return PdeProblem(
        id=pid,
        domain=domain,
        out_dim=1,
        residual=residual_klein_gordon,
        terms=required_terms(residual_klein_gordon, names, mesh),
        conditions=tuple(conds),
        exact=exact,
        reference=exact,
        eval_resolution=res,
        default_counts=32 if len(names) == 3 else 16,
        description=f"Klein-Gordon ({len(names) - 1}+1)-d",
    )


def make_problem_3d():
    return _make("kg3d", ("t", "x1", "x2"), exact_3d, 64)


def make_problem_4d():
    return _make("kg4d", ("t", "x1", "x2", "x3"), exact_4d, 32)
