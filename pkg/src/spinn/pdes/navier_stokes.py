"""(3+1)-d incompressible Navier-Stokes in vorticity form, Taylor-Green fields.

    ω_t + (u·∇)ω = (ω·∇)u + ν Δω + F,   ∇·u = 0
    x, y, z in [0, 2π], t in [0, 5], ν = 0.05

The network predicts velocity (three outputs); vorticity ω = ∇×u and its
derivatives are assembled from mixed partials of the velocity components.
"""

import numpy as np

from .base import Condition, Domain, PdeProblem, exact_target, face_conditions, full, required_terms, value_terms

NU = 0.05
NAMES = ("t", "x", "y", "z")
TWO_PI = 2.0 * np.pi
DOMAIN = Domain(((0.0, 5.0),) + ((0.0, TWO_PI),) * 3, NAMES, time_axis=0)
# (i, j, k) cyclic: ω_i = ∂_j u_k - ∂_k u_j
_CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


def _d(alpha, axis, n=1):
    a = list(alpha)
    a[axis] += n
    return tuple(a)


def _spatial(i):
    return i + 1


def vorticity(g, i, alpha=(0, 0, 0, 0)):
    """∂^alpha ω_i built from velocity partials."""
    _, j, k = _CYCLIC[i]
    return g.alpha(k, _d(alpha, _spatial(j))) - g.alpha(j, _d(alpha, _spatial(k)))


def forcing(mesh, nu=NU):
    t, x, y, z = mesh
    e = np.exp(-18.0 * nu * t)
    return (
        full(mesh, -6.0 * e * np.sin(4 * y) * np.sin(2 * z)),
        full(mesh, -6.0 * e * np.sin(4 * x) * np.sin(2 * z)),
        full(mesh, 6.0 * e * np.sin(4 * x) * np.sin(4 * y)),
    )


def residual_ns3d(g, mesh, nu=NU):
    zero = (0, 0, 0, 0)
    u = [g.alpha(c, zero) for c in range(3)]
    w = [vorticity(g, c) for c in range(3)]
    force = forcing(mesh, nu)
    out = {}
    for i, name in enumerate(("momentum_x", "momentum_y", "momentum_z")):
        r = vorticity(g, i, _d(zero, 0))
        for j in range(3):
            r = r + u[j] * vorticity(g, i, _d(zero, _spatial(j)))
            r = r - w[j] * g.alpha(i, _d(zero, _spatial(j)))
        lap = vorticity(g, i, _d(zero, 1, 2)) + vorticity(g, i, _d(zero, 2, 2)) + vorticity(g, i, _d(zero, 3, 2))
        out[name] = r - nu * lap - force[i]
    out["div"] = g.alpha(0, _d(zero, 1)) + g.alpha(1, _d(zero, 2)) + g.alpha(2, _d(zero, 3))
    return out


def exact_velocity(mesh, nu=NU):
    t, x, y, z = mesh
    e = np.exp(-9.0 * nu * t)
    return np.stack(
        [
            full(mesh, 2.0 * e * np.cos(2 * x) * np.sin(2 * y) * np.sin(z)),
            full(mesh, -e * np.sin(2 * x) * np.cos(2 * y) * np.sin(z)),
            full(mesh, -2.0 * e * np.sin(2 * x) * np.sin(2 * y) * np.cos(z)),
        ],
        axis=-1,
    )


def exact_vorticity(mesh, nu=NU):
    t, x, y, z = mesh
    e = np.exp(-9.0 * nu * t)
    return np.stack(
        [
            full(mesh, -3.0 * e * np.sin(2 * x) * np.cos(2 * y) * np.cos(z)),
            full(mesh, 6.0 * e * np.cos(2 * x) * np.sin(2 * y) * np.cos(z)),
            full(mesh, -6.0 * e * np.cos(2 * x) * np.cos(2 * y) * np.sin(z)),
        ],
        axis=-1,
    )


def observable(g):
    return [vorticity(g, i) for i in range(3)]


def _velocity_quantities(g):
    return [g(c) for c in range(3)]


def _ic_quantities(g):
    return _velocity_quantities(g) + observable(g)


def _ic_target(mesh):
    u, w = exact_velocity(mesh), exact_vorticity(mesh)
    return [u[..., c] for c in range(3)] + [w[..., c] for c in range(3)]


def make_problem():
    mesh = [np.zeros((1, 1, 1, 1))] * 4
    vel_terms = value_terms(NAMES, comps=(0, 1, 2))
    ic_terms = vel_terms + required_terms(lambda g: observable(g), NAMES)
    conds = [Condition("ic", 0, "lo", ic_terms, _ic_quantities, _ic_target)]
    conds += face_conditions(DOMAIN, vel_terms, _velocity_quantities, exact_target(exact_velocity, comps=(0, 1, 2)))
    return PdeProblem(
        id="ns4d",
        domain=DOMAIN,
        out_dim=3,
        residual=residual_ns3d,
        terms=required_terms(residual_ns3d, NAMES, mesh),
        conditions=tuple(conds),
        weights={"pde": 1.0, "ic": 10.0, "bc": 1.0},
        residual_weights={"div": 100.0},
        exact=exact_velocity,
        observable=observable,
        observable_terms=required_terms(lambda g: observable(g), NAMES),
        reference=exact_vorticity,
        eval_resolution=16,
        default_counts=8,
        description="(3+1)-d Navier-Stokes, Taylor-Green vortex (velocity output, vorticity error)",
    )
