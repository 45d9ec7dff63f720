"""Modulated body variables and the small-size structure of the body
equation.

The ambient vorticity moves the body-frame origin with a drift (the blob
velocity at the origin) and strains it with a traceless symmetric
gradient (two scalars a, b).  Removing the drift, and a strain
correction attached to the conformal center of the shape, from the body
velocity gives the modulated momentum.  In these variables Newton's
equations collapse to two exactly gyroscopic quadratic tensors, a
circulation term along a fixed axis, a weakly gyroscopic scalar and a
weakly nonlinear remainder.  This module builds those pieces, the
closed-form force approximations they come from, and residual and
identity checks evaluated along stored trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .biotsavart import velocity_free_space, velocity_gradient
from .coupled_system import CoupledState, force_B, force_C
from .geometry import perp
from .potential import MassData

__all__ = [
    "ModulationData",
    "StructureTensors",
    "modulation",
    "structure_tensors",
    "cross_product",
    "gyro_axis",
    "apply_lambda",
    "weakly_gyroscopic_G",
    "expansion_B",
    "expansion_C",
    "boundary_approximation_defect",
    "ResidualSeries",
    "normal_form_residual",
    "weak_gyro_calibration",
    "rotated_mass_identity_check",
    "modulation_rate_monitor",
]


# ---------------------------------------------------------------------------
# modulated variables


@dataclass(frozen=True)
class ModulationData:
    """Origin samples of the ambient blob field and the body momentum
    with the ambient drift removed.

    The three packed momenta share the scaled spin eps*r: ``p_scaled``
    keeps the raw velocity, ``p_offset`` removes the origin drift, and
    ``p_modulated`` additionally removes the strain correction through
    the conformal center.
    """

    origin_velocity: np.ndarray     # ambient velocity at the body origin
    a: float                        # strain scalars: gradient [[-a, b], [b, a]]
    b: float
    ell_modulated: np.ndarray
    p_modulated: np.ndarray         # (ell_modulated, eps r)
    p_scaled: np.ndarray            # (ell, eps r)
    p_offset: np.ndarray            # (ell - drift, eps r)
    clean: bool                     # False when a blob core crowds the origin

    @property
    def gradient_matrix(self) -> np.ndarray:
        return np.array([[-self.a, self.b], [self.b, self.a]])

    def strain(self, v) -> np.ndarray:
        """Apply the origin gradient; v may be one vector or (n, 2)."""
        v = np.asarray(v, dtype=float)
        return np.stack([-self.a * v[..., 0] + self.b * v[..., 1],
                         self.b * v[..., 0] + self.a * v[..., 1]], axis=-1)


def modulation(state: CoupledState) -> ModulationData:
    """Sample the blob field at the body origin and modulate (ell, r)."""
    if state.field.n:
        drift = velocity_free_space(state.field, np.zeros((1, 2)))[0]
        gs = velocity_gradient(state.field, np.zeros(2))
        a, b, clean = gs.a, gs.b, gs.clean
    else:
        drift = np.zeros(2)
        a = b = 0.0
        clean = True

    eps = state.eps
    xi = state.mass.xi
    strain_xi = np.array([-a * xi[0] + b * xi[1], b * xi[0] + a * xi[1]])
    ell_mod = state.ell - drift - eps * strain_xi
    sr = eps * state.r
    return ModulationData(
        origin_velocity=drift, a=a, b=b, ell_modulated=ell_mod,
        p_modulated=np.array([*ell_mod, sr]),
        p_scaled=np.array([*state.ell, sr]),
        p_offset=np.array([*(state.ell - drift), sr]),
        clean=clean)


# ---------------------------------------------------------------------------
# gyroscopic structure


def cross_product(pa, pb) -> np.ndarray:
    """Cross product of (velocity, spin) triples:
    (l_a, w_a) x (l_b, w_b) = (w_a l_b^perp - w_b l_a^perp, l_a^perp . l_b).

    This is the ordinary R^3 cross product written in 2d notation.
    """
    pa = np.asarray(pa, dtype=float)
    pb = np.asarray(pb, dtype=float)
    la, wa = pa[:2], pa[2]
    lb, wb = pb[:2], pb[2]
    return np.array([*(wa * perp(lb) - wb * perp(la)), perp(la) @ lb])


def gyro_axis(mass: MassData) -> np.ndarray:
    """Fixed axis of the circulation term: (xi^perp, -1)."""
    return np.array([*perp(mass.xi), -1.0])


def _lambda_quadratic(mass: MassData, which: str, p: np.ndarray) -> np.ndarray:
    ell, r = p[:2], p[2]
    if which == "g":
        return np.array([*(mass.m1 * r * perp(ell)), 0.0])
    Mb = mass.added_2x2
    under = np.array([*(r * perp(Mb @ ell)), perp(ell) @ (Mb @ ell)])
    if which == "under":
        return under
    if which == "a":
        return under + r * cross_product(p, mass.mu)
    raise ValueError(f"unknown tensor {which!r}; use 'g', 'under' or 'a'")


def apply_lambda(mass: MassData, which: str, p, q=None) -> np.ndarray:
    """Evaluate one of the quadratic gyroscopic tensors.

    With one argument: the quadratic form <Lambda, p, p>.  With two: the
    symmetric bilinear extension by polarization.  'g' is the genuine-mass
    tensor, 'under' the bare added-mass one, 'a' adds the spin coupling
    through the first moments of the potentials.
    """
    p = np.asarray(p, dtype=float)
    if q is None:
        return _lambda_quadratic(mass, which, p)
    q = np.asarray(q, dtype=float)
    return 0.5 * (_lambda_quadratic(mass, which, p + q)
                  - _lambda_quadratic(mass, which, p)
                  - _lambda_quadratic(mass, which, q))


@dataclass(frozen=True)
class StructureTensors:
    """The constant ingredients of the modulated body equation for one
    shape, bundled for trajectory post-processing."""

    mass: MassData

    @property
    def genuine(self) -> np.ndarray:
        return self.mass.genuine

    @property
    def added(self) -> np.ndarray:
        return self.mass.added_3x3

    @property
    def axis(self) -> np.ndarray:
        return gyro_axis(self.mass)

    def apply(self, which: str, p, q=None) -> np.ndarray:
        return apply_lambda(self.mass, which, p, q)

    def inertia(self, eps: float, alpha: float) -> np.ndarray:
        """eps^alpha M_g + eps^2 M_a acting on modulated momenta (the
        spin scaling is already inside p, so no diagonal scaling here)."""
        return eps ** alpha * self.genuine + eps ** 2 * self.added


def structure_tensors(mass: MassData) -> StructureTensors:
    return StructureTensors(mass=mass)


def weakly_gyroscopic_G(mod: ModulationData, mass: MassData) -> np.ndarray:
    """Weakly gyroscopic vector (0, 0, xi . strain(xi) + a eta_1 - b eta_2)."""
    xi, eta = mass.xi, mass.eta
    third = xi @ mod.strain(xi) + mod.a * eta[0] - mod.b * eta[1]
    return np.array([0.0, 0.0, third])


# ---------------------------------------------------------------------------
# closed-form force approximations (order-of-accuracy studies only)


def expansion_B(state: CoupledState, mod: ModulationData | None = None) -> np.ndarray:
    """Leading behavior of the vorticity force at small body size.

    Every coefficient carries its size scaling already (mass entries,
    area, centroid and quartic moments of the scaled shape), so the
    components 1, 2 are accurate to O(eps^2) and component 3 to
    O(eps^3).
    """
    if mod is None:
        mod = modulation(state)
    sc = state.scaled
    m = sc.mass
    S = sc.area
    xg = sc.centroid
    a, b = mod.a, mod.b
    k0 = mod.origin_velocity
    l1, l2 = state.ell
    r = state.r

    lead = r * (m[:2, :2] + S * np.eye(2)) @ perp(k0)
    col1 = np.array([-(m[0, 0] + S) * a + m[0, 1] * b,
                     -m[1, 0] * a + (m[1, 1] + S) * b])
    col2 = np.array([m[0, 1] * a + (m[0, 0] + S) * b,
                     (m[1, 1] + S) * a + m[1, 0] * b])
    col3 = np.array([m[0, 4] + S * xg[1], m[1, 4] + S * xg[0]])
    col4 = np.array([-m[0, 3] + S * xg[0], -m[1, 3] - S * xg[1]])
    b12 = lead - l1 * col1 - l2 * col2 - 2 * r * a * col3 - 2 * r * b * col4

    b3 = (r * (np.array([m[2, 1], -m[2, 0]]) + S * xg) @ k0
          - l1 * ((-m[2, 0] + S * xg[1]) * a + (m[2, 1] + S * xg[0]) * b)
          - l2 * ((m[2, 1] + S * xg[0]) * a + (m[2, 0] - S * xg[1]) * b)
          - 2 * r * a * (m[2, 4] + sc.m_diff)
          + 2 * r * b * (m[2, 3] + sc.m_cross))
    return np.array([b12[0], b12[1], b3])


def expansion_C(state: CoupledState,
                mod: ModulationData | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Leading behavior of the two boundary forces (quadratic part,
    circulation part); same accuracy pattern as expansion_B."""
    if mod is None:
        mod = modulation(state)
    sc = state.scaled
    m = sc.mass
    S = sc.area
    xg = sc.centroid
    a, b = mod.a, mod.b
    k0 = mod.origin_velocity
    l1, l2 = state.ell
    r = state.r
    off = k0 - state.ell

    lead = (r ** 2 * np.array([-m[2, 1], m[2, 0]])
            - r * perp(m[:2, :2] @ off + S * k0))
    t1 = np.array([(m[0, 0] + S) * a - m[0, 1] * b,
                   -m[0, 1] * a - (m[0, 0] + S) * b])
    t2 = np.array([m[1, 0] * a - (m[1, 1] + S) * b,
                   -(m[1, 1] + S) * a - m[1, 0] * b])
    t3 = np.array([-m[2, 0] + m[3, 1] + 2 * S * xg[1],
                   m[2, 1] - m[3, 0] + 2 * S * xg[0]])
    t4 = np.array([m[2, 1] + m[4, 1] + 2 * S * xg[0],
                   m[2, 0] - m[4, 0] - 2 * S * xg[1]])
    ca12 = lead - l1 * t1 - l2 * t2 + a * r * t3 + b * r * t4

    ca3 = (perp(off) @ (m[:2, :2] @ off)
           + r * off @ np.array([-m[2, 1], m[2, 0]])
           - r * S * (k0 @ xg)
           + l1 * (a * (-m[3, 1] + S * xg[1] + 2 * m[0, 4])
                   + b * (-m[4, 1] + S * xg[0] - 2 * m[0, 3]))
           + l2 * (a * (m[3, 0] + S * xg[0] + 2 * m[1, 4])
                   + b * (m[4, 0] - S * xg[1] - 2 * m[1, 3]))
           + 2 * r * a * (m[2, 4] + sc.m_diff)
           - 2 * r * b * (m[2, 3] + sc.m_cross))

    gamma, eps = state.gamma, state.eps
    xi, eta = state.mass.xi, state.mass.eta
    cb12 = (gamma * perp(off) + gamma * eps * r * xi
            + gamma * eps * perp(mod.strain(xi)))
    cb3 = (gamma * eps * (xi @ off)
           + gamma * eps ** 2 * (-a * eta[0] + b * eta[1]))

    return (np.array([ca12[0], ca12[1], ca3]),
            np.array([cb12[0], cb12[1], cb3]))


def boundary_approximation_defect(state: CoupledState,
                                  mod: ModulationData | None = None) -> float:
    """Boundary L2 gap between the drift-strain-potential surrogate of
    the circulation-free trace and the exact one.

    The surrogate replaces the blob field by its origin jet (drift plus
    strain) and carries the induced potentials; the spin potential is
    shared by both sides.  Decays like eps^(5/2).
    """
    if mod is None:
        mod = modulation(state)
    sc = state.scaled
    mesh = sc.base.mesh
    nodes = state.eps * mesh.x
    off = state.ell - mod.origin_velocity

    surrogate = (mod.origin_velocity + mod.strain(nodes)
                 + off[0] * sc.phi_boundary_trace(1)
                 + off[1] * sc.phi_boundary_trace(2)
                 - mod.a * sc.phi_boundary_trace(4)
                 - mod.b * sc.phi_boundary_trace(5)
                 + state.r * sc.phi_boundary_trace(3))
    exact = state.flow().tilde_boundary_trace()
    gap = exact - surrogate
    return float(np.sqrt(((gap ** 2).sum(1) * state.eps * mesh.w).sum()))


# ---------------------------------------------------------------------------
# trajectory diagnostics


def _modulated_series(states: Sequence[CoupledState]):
    mods = [modulation(s) for s in states]
    p = np.array([m.p_modulated for m in mods])
    return mods, p


@dataclass(frozen=True)
class ResidualSeries:
    """Centered-difference residual of the modulated body equation,
    rescaled by eps^min(alpha, 2), at the interior sample times."""

    t: np.ndarray
    p_modulated: np.ndarray
    implied: np.ndarray          # remainder force series, (n-2, 3)
    fitted_constant: float       # max |implied| / (1 + |p| + eps |p|^2)
    eps: float
    alpha: float
    dt_converged: bool | None = None  # None when the run is too short to tell

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.implied, axis=1)


def _residual_core(states, dt, body_rates, mods, p):
    eps, alpha = states[0].eps, states[0].alpha
    mass = states[0].mass
    M = eps ** alpha * mass.genuine + eps ** 2 * mass.added_3x3
    axis = gyro_axis(mass)
    drift = np.array([m.origin_velocity + eps * m.strain(mass.xi)
                      for m in mods])
    out = np.empty((len(states) - 2, 3))
    for k in range(1, len(states) - 1):
        if body_rates is None:
            dp = (p[k + 1] - p[k - 1]) / (2.0 * dt)
        else:
            drift_dot = (drift[k + 1] - drift[k - 1]) / (2.0 * dt)
            rate = np.asarray(body_rates[k], dtype=float)
            dp = np.array([rate[0] - drift_dot[0], rate[1] - drift_dot[1],
                           eps * rate[2]])
        quad = (eps ** (alpha - 1.0) * apply_lambda(mass, "g", p[k])
                + eps * apply_lambda(mass, "a", p[k]))
        gyro = states[k].gamma * cross_product(p[k], axis)
        weak = eps * states[k].gamma * weakly_gyroscopic_G(mods[k], mass)
        out[k - 1] = (M @ dp + quad - gyro - weak) / eps ** min(alpha, 2.0)
    sizes = np.linalg.norm(p[1:-1], axis=1)
    fitted = float((np.linalg.norm(out, axis=1)
                    / (1.0 + sizes + eps * sizes ** 2)).max())
    return out, fitted


def normal_form_residual(states: Sequence[CoupledState], dt: float,
                         body_rates: Sequence[np.ndarray] | None = None,
                         ) -> ResidualSeries:
    """Everything in the modulated equation except the remainder force,
    moved to one side: what is left over, divided by its expected size.

    The momentum derivative uses centered differences at the stored
    cadence, no smoothing; dt_converged compares against the double
    cadence and flags runs sampled too coarsely for the difference to
    mean anything.  The finite difference of the fast momentum is the
    dominant error source when the gyroscopic oscillation is poorly
    resolved, so exact body rates (ell', r') recorded along the run may
    be passed in to replace it; the slow drift term is still differenced.
    """
    if len(states) < 3:
        raise ValueError("need at least three uniformly spaced states")
    if body_rates is not None and len(body_rates) != len(states):
        raise ValueError("need one rate triple per state")
    eps, alpha = states[0].eps, states[0].alpha
    mods, p = _modulated_series(states)
    out, fitted = _residual_core(states, dt, body_rates, mods, p)

    converged = None
    if len(states) >= 5:
        sub = slice(None, None, 2)
        _, coarse = _residual_core(
            states[sub], 2.0 * dt,
            None if body_rates is None else body_rates[sub],
            mods[sub], p[sub])
        scale = max(fitted, np.finfo(float).tiny)
        converged = bool(abs(coarse - fitted) <= 0.1 * scale)

    return ResidualSeries(
        t=np.array([s.t for s in states[1:-1]]),
        p_modulated=p[1:-1], implied=out, fitted_constant=fitted,
        eps=eps, alpha=alpha, dt_converged=converged)


def weak_gyro_calibration(states: Sequence[CoupledState], dt: float) -> float:
    """Fitted constant of the weak-gyroscopic bound: the running integral
    of p . G against eps (1 + t + integral of |p|^2), maximized in time."""
    eps = states[0].eps
    mass = states[0].mass
    mods, p = _modulated_series(states)
    dots = np.array([pk @ weakly_gyroscopic_G(mk, mass)
                     for pk, mk in zip(p, mods)])
    sizes2 = (p ** 2).sum(1)
    num = 0.0
    size_int = 0.0
    best = 0.0
    for k in range(1, len(states)):
        num += 0.5 * dt * (dots[k - 1] + dots[k])
        size_int += 0.5 * dt * (sizes2[k - 1] + sizes2[k])
        elapsed = states[k].t - states[0].t
        best = max(best, abs(num) / (eps * (1.0 + elapsed + size_int)))
    return best


def rotated_mass_identity_check(states: Sequence[CoupledState],
                                dt: float) -> float:
    """Max gap, over interior times and the two velocity components,
    between the attitude-rotated inertia terms and the plain time
    derivative of the rotated momentum.

    Both sides use centered differences; the gap vanishes at rate dt^2.
    """
    if len(states) < 3:
        raise ValueError("need at least three uniformly spaced states")
    eps, alpha = states[0].eps, states[0].alpha
    mass = states[0].mass
    Mg, Ma = mass.genuine, mass.added_3x3
    M = eps ** alpha * Mg + eps ** 2 * Ma

    _, p = _modulated_series(states)

    def Q(theta):
        c, s = np.cos(theta), np.sin(theta)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    rotated = np.array([
        (eps ** alpha * Mg @ Q(s.placement.theta)
         + eps ** 2 * Q(s.placement.theta) @ Ma) @ pk
        for s, pk in zip(states, p)])

    worst = 0.0
    for k in range(1, len(states) - 1):
        dp = (p[k + 1] - p[k - 1]) / (2.0 * dt)
        quad = (eps ** (alpha - 1.0) * apply_lambda(mass, "g", p[k])
                + eps * apply_lambda(mass, "a", p[k]))
        lhs = (Q(states[k].placement.theta) @ (M @ dp + quad))[:2]
        rhs = ((rotated[k + 1] - rotated[k - 1]) / (2.0 * dt))[:2]
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def modulation_rate_monitor(states: Sequence[CoupledState], dt: float):
    """Centered-difference rate of the drift-plus-strain correction,
    with the spin rotation removed, fitted against 1 + |p_modulated|.

    Returns (times, rates, fitted constant).  Bounded along healthy runs.
    """
    eps = states[0].eps
    mods, p = _modulated_series(states)
    xi = states[0].mass.xi
    vals = np.array([m.origin_velocity + eps * m.strain(xi) for m in mods])

    t = np.array([s.t for s in states[1:-1]])
    rates = np.empty((len(states) - 2, 2))
    fitted = 0.0
    for k in range(1, len(states) - 1):
        rate = ((vals[k + 1] - vals[k - 1]) / (2.0 * dt)
                + states[k].r * perp(mods[k].origin_velocity))
        rates[k - 1] = rate
        size = np.linalg.norm(p[k])
        fitted = max(fitted, float(np.linalg.norm(rate) / (1.0 + size)))
    return t, rates, fitted
