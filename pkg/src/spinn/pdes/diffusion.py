"""Diffusion problems.

``diffusion_nl3d``: u_t = α(|∇u|² + u Δu), α = 0.05, x in [-1, 1]², t in [0, 1],
three-Gaussian initial bump, zero Dirichlet boundary.  No closed form.

``diffusion6d``: u_t = Δu on x in [-1, 1]^5, t in [0, 1] with
u = |x|² + 10 t (10 = 2 * 5, so the residual vanishes identically).
"""

import numpy as np

from .base import Condition, Domain, PdeProblem, exact_target, face_conditions, full, required_terms, value_quantities, value_terms

ALPHA = 0.05
NL_NAMES = ("t", "x", "y")
NL_DOMAIN = Domain(((0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)), NL_NAMES, time_axis=0)

# (amplitude, sharpness, centre x, centre y)
GAUSSIANS = ((0.25, 10.0, 0.2, 0.3), (0.4, 15.0, -0.1, -0.5), (0.3, 20.0, -0.5, 0.0))


def initial_bumps(x, y):
    return sum(a * np.exp(-s * ((x - cx) ** 2 + (y - cy) ** 2)) for a, s, cx, cy in GAUSSIANS)


def residual_diffusion_nl(g, mesh, alpha=ALPHA):
    grad_sq = g(x=1) * g(x=1) + g(y=1) * g(y=1)
    return {"pde": g(t=1) - alpha * (grad_sq + g() * (g(x=2) + g(y=2)))}


def _ic_target(mesh):
    _, x, y = mesh
    return [full(mesh, initial_bumps(x, y))]


def _zero(mesh):
    return [full(mesh, 0.0)]


def make_nonlinear():
    vt = value_terms(NL_NAMES)
    conds = [Condition("ic", 0, "lo", vt, value_quantities(), _ic_target)]
    conds += face_conditions(NL_DOMAIN, vt, value_quantities(), _zero)
    return PdeProblem(
        id="diffusion_nl3d",
        domain=NL_DOMAIN,
        out_dim=1,
        residual=residual_diffusion_nl,
        terms=required_terms(residual_diffusion_nl, NL_NAMES, [np.zeros((1, 1, 1))] * 3),
        conditions=tuple(conds),
        eval_resolution=64,
        default_counts=32,
        description="nonlinear diffusion (no analytic reference)",
    )


LIN_NAMES = ("t", "x1", "x2", "x3", "x4", "x5")
LIN_DOMAIN = Domain(((0.0, 1.0),) + ((-1.0, 1.0),) * 5, LIN_NAMES, time_axis=0)


def exact_6d(mesh):
    t, *xs = mesh
    return full(mesh, sum(x * x for x in xs) + 10.0 * t)


def residual_diffusion_linear6d(g, mesh):
    lap = g(x1=2) + g(x2=2) + g(x3=2) + g(x4=2) + g(x5=2)
    return {"pde": g(t=1) - lap}


def make_linear6d():
    vt = value_terms(LIN_NAMES)
    conds = [Condition("ic", 0, "lo", vt, value_quantities(), exact_target(exact_6d))]
    conds += face_conditions(LIN_DOMAIN, vt, value_quantities(), exact_target(exact_6d))
    return PdeProblem(
        id="diffusion6d",
        domain=LIN_DOMAIN,
        out_dim=1,
        residual=residual_diffusion_linear6d,
        terms=required_terms(residual_diffusion_linear6d, LIN_NAMES, [np.zeros((1,) * 6)] * 6),
        conditions=tuple(conds),
        exact=exact_6d,
        reference=exact_6d,
        eval_resolution=8,
        default_counts=8,
        description="(5+1)-d heat equation, u = |x|^2 + 10t",
    )
