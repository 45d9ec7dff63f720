"""The full body-fluid system at body scale eps, evolved in the frame
attached to the body.

State: blob-discretized vorticity (body frame), body velocity (ell, r),
attitude theta and lab position h.  Newton's equations use the
pressure-free reformulation: the force splits into a vorticity part B
(a blob sum against the Kirchhoff potential gradients) and boundary
parts C_a, C_b, C_c (quadratures of the circulation-free trace and the
harmonic field against the rigid normal data), plus the Coriolis-type
term from the rotating frame.  The pressure itself is never formed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Placement, perp, polygon_contains, rotation
from .potential import MassData, ScaledPotentials, log_potential_sum
from .biotsavart import (
    BlobField,
    BodyCollisionError,
    BodyFrameVelocity,
    pair_stream_matrix,
    velocity_free_space,
)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class TimeStepError(RuntimeError):
    """dt too large for the current blob/body configuration."""


@dataclass(frozen=True)
class VorticityPatch:
    """Annular patch of uniform vorticity, discretized on a fixed
    cell-centered lattice (deterministic: no randomness in the fill).

    Each cell inside the annulus becomes one blob of strength
    spacing^2 * vorticity at the cell center.
    """

    inner: float
    outer: float
    vorticity: float = 1.0
    spacing: float = 0.05
    delta: float | None = None    # default: one lattice cell

    def __post_init__(self):
        if not 0.0 <= self.inner < self.outer:
            raise ValueError("need 0 <= inner < outer")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    def discretize(self, frame: str = "body") -> BlobField:
        s = self.spacing
        k = int(np.ceil(self.outer / s)) + 1
        idx = np.arange(-k, k) + 0.5
        X, Y = np.meshgrid(idx * s, idx * s)
        pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
        rad = np.hypot(pts[:, 0], pts[:, 1])
        keep = (self.inner <= rad) & (rad <= self.outer)
        pts = pts[keep]
        gam = np.full(len(pts), s * s * self.vorticity)
        return BlobField(x=pts, gamma=gam, delta=self.delta or s,
                         frame=frame)


@dataclass(frozen=True)
class CoupledState:
    eps: float
    alpha: float
    placement: Placement
    ell: np.ndarray
    r: float
    field: BlobField           # body frame
    gamma: float
    scaled: ScaledPotentials
    mass: MassData
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ell", np.asarray(self.ell, dtype=float).reshape(2))
        if self.field.frame != "body":
            raise ValueError("coupled blobs live in the body frame")
        if self.scaled.eps != self.eps:
            raise ValueError("potential scale disagrees with eps")

    @property
    def body_mass(self) -> float:
        return self.eps ** self.alpha * self.mass.m1

    @property
    def inertia_matrix(self) -> np.ndarray:
        return self.mass.total_mass(self.eps, self.alpha)

    @property
    def p(self) -> np.ndarray:
        return np.array([self.ell[0], self.ell[1], self.r])

    def flow(self, field: BlobField | None = None, ell=None,
             r: float | None = None) -> BodyFrameVelocity:
        return BodyFrameVelocity(
            self.scaled,
            self.field if field is None else field,
            self.gamma,
            self.ell if ell is None else ell,
            self.r if r is None else r,
        )

    def body_nodes(self) -> np.ndarray:
        return self.eps * self.scaled.base.mesh.x

    def boundary_distance(self) -> float:
        """Smallest blob distance to the boundary nodes."""
        if self.field.n == 0:
            return np.inf
        d = self.field.x[:, None, :] - self.body_nodes()[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1).min()))

    def support_radii(self) -> tuple[float, float]:
        if self.field.n == 0:
            return (np.inf, 0.0)
        rad = np.hypot(self.field.x[:, 0], self.field.x[:, 1])
        return (float(rad.min()), float(rad.max()))


def init_coupled(scaled: ScaledPotentials, mass: MassData, *, alpha: float,
                 gamma: float, ell0=(0.0, 0.0), r0: float = 0.0,
                 patch: VorticityPatch | None = None,
                 field: BlobField | None = None) -> CoupledState:
    """Assemble an initial state: body at rest pose (h=0, theta=0), blobs
    from a lattice-filled patch (or given directly), body velocity
    (ell0, r0).

    The body must sit well inside the vorticity support: we require the
    body circumradius below half the closest blob distance.
    """
    if patch is not None and field is not None:
        raise ValueError("give a patch or a prebuilt field, not both")
    if patch is not None:
        field = patch.discretize()
    if field is None:
        field = BlobField.empty()
    if gamma == 0.0:
        log.warning("gamma = 0: runs are fine, zero-size limit claims are not")

    body_radius = scaled.eps * np.hypot(*scaled.base.mesh.x.T).max()
    if field.n:
        closest = field.distances_to([0.0, 0.0]).min()
        if 2.0 * body_radius > closest:
            raise ValueError(
                f"body circumradius {body_radius:.3f} too large for vorticity "
                f"support starting at {closest:.3f}")
        if polygon_contains(scaled.eps * scaled.base.mesh.x, field.x).any():
            raise BodyCollisionError("initial vorticity overlaps the body")

    return CoupledState(eps=scaled.eps, alpha=float(alpha),
                        placement=Placement(h=np.zeros(2), theta=0.0),
                        ell=ell0, r=float(r0), field=field,
                        gamma=float(gamma), scaled=scaled, mass=mass)


# ---------------------------------------------------------------------------
# forces


def force_B(state: CoupledState, flow: BodyFrameVelocity | None = None,
            velocity_at_blobs: np.ndarray | None = None) -> np.ndarray:
    """Vorticity force: blob sum of [v - ell - r x^perp]^perp . grad Phi_i.

    Evaluated adjointly: the potentials are single layers on shared
    nodes, so the blob sum collapses onto one pairwise pass followed by
    a dot product with each charge vector.
    """
    if state.field.n == 0:
        return np.zeros(3)
    if velocity_at_blobs is None:
        if flow is None:
            flow = state.flow()
        velocity_at_blobs = flow.velocity(state.field.x)
    x = state.field.x
    u_perp = perp(velocity_at_blobs - state.ell - state.r * perp(x))
    weights = state.field.gamma[:, None] * u_perp

    unit = x / state.eps
    nodes = state.scaled.base.mesh.x
    d = unit[:, None, :] - nodes[None, :, :]
    r2 = (d ** 2).sum(-1)
    lobe = ((weights[:, None, :] * d).sum(-1) / r2).sum(0) / TWO_PI

    phi = state.scaled.base.phi
    return np.array([phi[0].charges @ lobe, phi[1].charges @ lobe,
                     state.eps * (phi[2].charges @ lobe)])


def force_C(state: CoupledState, flow: BodyFrameVelocity | None = None):
    """Boundary force terms (C_a, C_b, C_c), each a 3-vector.

    C_c vanishes identically (an exact property of the harmonic field);
    it is still computed so the cancellation is visible in tests.
    """
    if flow is None:
        flow = state.flow()
    mesh = state.scaled.base.mesh
    w = state.eps * mesh.w
    # normal data of the three rigid motions on the scaled body
    K = np.stack([mesh.neumann_data(1), mesh.neumann_data(2),
                  state.eps * mesh.neumann_data(3)])

    vt = flow.tilde_boundary_trace()
    rigid = state.ell + state.r * perp(state.eps * mesh.x)
    H = state.scaled.h_boundary_trace()

    quad = lambda f: K @ (f * w)
    C_a = quad(0.5 * (vt ** 2).sum(1)) - quad((rigid * vt).sum(1))
    C_b = state.gamma * quad(((vt - rigid) * H).sum(1))
    C_c = 0.5 * state.gamma ** 2 * quad((H ** 2).sum(1))
    return C_a, C_b, C_c


@dataclass(frozen=True)
class ForceBreakdown:
    B: np.ndarray
    C_a: np.ndarray
    C_b: np.ndarray
    C_c: np.ndarray
    coriolis: np.ndarray
    accel: np.ndarray        # (ell', r')

    @property
    def total_force(self) -> np.ndarray:
        return -(self.B + self.C_a + self.C_b + self.C_c + self.coriolis)


def accelerations(state: CoupledState, flow: BodyFrameVelocity | None = None,
                  velocity_at_blobs: np.ndarray | None = None) -> ForceBreakdown:
    """Solve M (ell', r') = -B - C - (m r ell^perp, 0)."""
    if flow is None:
        flow = state.flow()
    B = force_B(state, flow, velocity_at_blobs)
    C_a, C_b, C_c = force_C(state, flow)
    cor = np.array([*(state.body_mass * state.r * perp(state.ell)), 0.0])
    rhs = -(B + C_a + C_b + C_c + cor)
    accel = np.linalg.solve(state.inertia_matrix, rhs)
    return ForceBreakdown(B=B, C_a=C_a, C_b=C_b, C_c=C_c, coriolis=cor,
                          accel=accel)


# ---------------------------------------------------------------------------
# time stepping


def _stage_rhs(state: CoupledState, x, ell, r, theta):
    """Time derivatives of (blob positions, ell, r, theta, h) at a stage."""
    field = state.field.with_positions(x)
    flow = state.flow(field=field, ell=ell, r=r)
    if field.n:
        v = flow.velocity(x)
        x_dot = v - ell - r * perp(x)
    else:
        v = None
        x_dot = np.zeros((0, 2))
    stage = replace(state, field=field, ell=ell, r=float(r))
    fb = accelerations(stage, flow, velocity_at_blobs=v)
    h_dot = rotation(theta) @ ell
    return x_dot, fb.accel[:2], fb.accel[2], float(r), h_dot


def coupled_step(state: CoupledState, dt: float) -> CoupledState:
    """One RK4 step of the joint blob + body system.

    Guard: the step must not let any blob cross a fifth of the current
    clearance to the body; a collision inside a stage aborts the run.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")

    x0 = state.field.x
    ell0, r0 = state.ell, state.r
    th0, h0 = state.placement.theta, state.placement.h

    k1 = _stage_rhs(state, x0, ell0, r0, th0)
    if state.field.n:
        vmax = float(np.hypot(k1[0][:, 0], k1[0][:, 1]).max())
        clearance = state.boundary_distance()
        if dt * vmax >= 0.2 * clearance:
            raise TimeStepError(
                f"dt {dt:.3e} x speed {vmax:.3f} exceeds a fifth of the "
                f"clearance {clearance:.3f}")

    def at(c, k):
        return (x0 + c * dt * k[0], ell0 + c * dt * k[1], r0 + c * dt * k[2],
                th0 + c * dt * k[3])

    k2 = _stage_rhs(state, *at(0.5, k1))
    k3 = _stage_rhs(state, *at(0.5, k2))
    k4 = _stage_rhs(state, *at(1.0, k3))

    def mix(i):
        return (dt / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])

    return replace(
        state,
        field=state.field.with_positions(x0 + mix(0)),
        ell=ell0 + mix(1),
        r=r0 + mix(2),
        placement=Placement(h=h0 + mix(4), theta=th0 + mix(3)),
        t=state.t + dt,
    )


# ---------------------------------------------------------------------------
# conserved energy


def total_energy(state: CoupledState) -> float:
    """Half of 2H = p^T M p - sum_jk G_jk G_H(x_j,x_k) - 2 gamma sum_j G_j Psi_H(x_j).

    The Green's function of the exterior domain splits into the free log,
    its harmonic boundary correction (one Dirichlet solve per call), and
    the stream of the circulation field; the blob self-interaction uses
    the regularized pair stream.
    """
    p = state.p
    quad = float(p @ state.inertia_matrix @ p)
    f = state.field
    if f.n == 0:
        return 0.5 * quad

    mesh = state.scaled.base.mesh
    eps = state.eps
    beta = f.beta

    psi = f.gamma @ pair_stream_matrix(f) @ f.gamma

    # harmonic correction of the free log, with the log growth -beta/2pi
    # carried by a pole at an interior point so the solve decays
    pole = eps * mesh.interior_point
    nodes = eps * mesh.x

    def base(points):
        d = np.asarray(points, float).reshape(-1, 2) - pole
        return -(beta / (2 * TWO_PI)) * np.log((d ** 2).sum(1))

    data = -(log_potential_sum(nodes, f.x, f.gamma) + base(nodes))
    sigma, c = state.scaled.base.ops.dirichlet_density(data)
    correction = (base(f.x)
                  + log_potential_sum(f.x / eps, mesh.x, sigma * mesh.w) + c)
    green = psi + float(f.gamma @ correction)

    stream = state.scaled.h_stream(f.x)
    return 0.5 * (quad - green
                  - 2.0 * (beta + state.gamma) * float(f.gamma @ stream))


def green_function(state: CoupledState, x, y) -> float:
    """Exterior Dirichlet Green's function at one pair of points (for
    tests; the energy path computes the same correction in bulk)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    mesh = state.scaled.base.mesh
    eps = state.eps
    pole = eps * mesh.interior_point
    nodes = eps * mesh.x
    base = lambda q: -(1.0 / (2 * TWO_PI)) * np.log(((q - pole) ** 2).sum())
    free = lambda q: (1.0 / (2 * TWO_PI)) * np.log(((q - y) ** 2).sum())
    data = np.array([-(free(q) + base(q)) for q in nodes])
    sigma, c = state.scaled.base.ops.dirichlet_density(data)
    val = (base(x) + log_potential_sum(x / eps, mesh.x, sigma * mesh.w)[0] + c)
    return free(x) + val


# ---------------------------------------------------------------------------
# lab frame


@dataclass(frozen=True)
class LabFrameView:
    h: np.ndarray
    h_dot: np.ndarray
    theta: float
    field: BlobField        # lab frame
    _state: CoupledState

    def velocity(self, points) -> np.ndarray:
        """Lab-frame fluid velocity u(y) = R v(R^T (y - h))."""
        pl = self._state.placement
        body = self._state.flow().velocity(pl.to_body(points))
        return pl.vector_to_lab(body)


def lab_frame_view(state: CoupledState) -> LabFrameView:
    pl = state.placement
    lab_positions = pl.to_lab(state.field.x)
    return LabFrameView(
        h=pl.h.copy(),
        h_dot=rotation(pl.theta) @ state.ell,
        theta=pl.theta,
        field=replace(state.field, x=lab_positions, frame="lab"),
        _state=state,
    )


def vorticity_speed_bound(state: CoupledState) -> float:
    """max |v| over the blob support, one of the monitored quantities."""
    if state.field.n == 0:
        return 0.0
    u = state.flow().velocity(state.field.x)
    return float(np.hypot(u[:, 0], u[:, 1]).max())
