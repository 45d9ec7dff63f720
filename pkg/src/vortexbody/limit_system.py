"""Point vortex of strength gamma coupled to transported background
vorticity: the zero-size limit of the body-fluid system.

The vortex moves with the blob-induced velocity alone; the blobs feel
each other and the vortex.  Both evolve in the lab frame.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import perp
from .biotsavart import BlobField, velocity_free_space

TWO_PI = 2.0 * np.pi


class VortexCollisionError(RuntimeError):
    """Vorticity reached the point vortex; the evolution is no longer in
    the regime where the model makes sense."""


@dataclass(frozen=True)
class VortexWaveState:
    h: np.ndarray
    field: BlobField
    gamma: float
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float).reshape(2))
        if self.field.frame != "lab":
            raise ValueError("vortex-wave blobs live in the lab frame")


def support_annulus(state: VortexWaveState) -> tuple[float, float]:
    """Closest and farthest blob distance from the vortex; (inf, 0) when
    there are no blobs."""
    if state.field.n == 0:
        return (np.inf, 0.0)
    d = state.field.distances_to(state.h)
    return (float(d.min()), float(d.max()))


def _rhs(h, field: BlobField, gamma: float):
    rho_min = field.distances_to(h).min() if field.n else np.inf
    if rho_min < 5.0 * field.delta:
        raise VortexCollisionError(
            f"blob within 5 core radii of the vortex (d={rho_min:.3e})")
    h_dot = velocity_free_space(field, h)[0]
    if field.n == 0:
        return h_dot, np.zeros((0, 2))
    d = field.x - h
    r2 = (d ** 2).sum(axis=1)
    point_term = (gamma / TWO_PI) * np.stack([-d[:, 1], d[:, 0]], -1) / r2[:, None]
    blob_dot = velocity_free_space(field, field.x) + point_term
    return h_dot, blob_dot


def vw_rhs(state: VortexWaveState):
    """Velocities of the vortex and of every blob.

    The vortex sees only the blobs (no self term); the blobs see each
    other and the exact point-vortex kernel.
    """
    return _rhs(state.h, state.field, state.gamma)


def vw_step(state: VortexWaveState, dt: float) -> VortexWaveState:
    """One RK4 step of the joint (vortex, blobs) system."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    h0, x0 = state.h, state.field.x
    f = state.field
    g = state.gamma

    kh1, kx1 = _rhs(h0, f, g)
    kh2, kx2 = _rhs(h0 + 0.5 * dt * kh1, f.with_positions(x0 + 0.5 * dt * kx1), g)
    kh3, kx3 = _rhs(h0 + 0.5 * dt * kh2, f.with_positions(x0 + 0.5 * dt * kx2), g)
    kh4, kx4 = _rhs(h0 + dt * kh3, f.with_positions(x0 + dt * kx3), g)

    h1 = h0 + (dt / 6.0) * (kh1 + 2 * kh2 + 2 * kh3 + kh4)
    x1 = x0 + (dt / 6.0) * (kx1 + 2 * kx2 + 2 * kx3 + kx4)
    return replace(state, h=h1, field=f.with_positions(x1), t=state.t + dt)


def weighted_centroid(state: VortexWaveState) -> np.ndarray:
    """Circulation-weighted centroid (gamma h + sum G_j x_j)/(gamma + sum G_j),
    an invariant of the exact dynamics; its drift measures time-stepping
    error.  Undefined (zero total) raises."""
    total = state.gamma + state.field.beta
    if total == 0.0:
        raise ZeroDivisionError("total circulation vanishes")
    s = state.gamma * state.h + state.field.gamma @ state.field.x
    return s / total
