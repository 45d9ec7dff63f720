"""Complex-variable contour calculus on boundary meshes.

A divergence-free, curl-free vector field f = (f1, f2) is encoded by the
complex trace fhat = f1 - i f2 (holomorphic in z = x1 + i x2 where f is
both div- and curl-free).  The pointwise identity

    fhat dz = (f.tau) ds - i (f.n) ds

(with n into the solid, tau = -perp(n)) converts between complex contour
integrals and real flux/circulation quadratures, and the Blasius pairing
turns quadratic boundary pressures into residue-countable integrals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundaryMesh, geometric_moments

#: recognized weight tags for contour_integral
WEIGHTS = ("1", "z", "zbar", "abs2", "z2", "zabs2")


def hat_field(f) -> np.ndarray:
    """Complex trace f1 - i f2 of a real vector field sampled as (..., 2)."""
    f = np.asarray(f)
    return f[..., 0] - 1j * f[..., 1]


def unhat(fhat) -> np.ndarray:
    """Inverse of hat_field."""
    fhat = np.asarray(fhat)
    return np.stack([fhat.real, -fhat.imag], axis=-1)


def _weight_values(mesh: BoundaryMesh, weight: str) -> np.ndarray:
    z = mesh.z
    if weight == "1":
        return np.ones_like(z)
    if weight == "z":
        return z
    if weight == "zbar":
        return np.conj(z)
    if weight == "abs2":
        return (z * np.conj(z)).real.astype(complex)
    if weight == "z2":
        return z * z
    if weight == "zabs2":
        return z * (z * np.conj(z)).real
    raise ValueError(f"unknown weight {weight!r}; expected one of {WEIGHTS}")


def contour_integral(mesh: BoundaryMesh, field=None, weight: str = "1") -> complex:
    """Counterclockwise integral of weight(z) * fhat(z) dz over the boundary.

    ``field`` may be a real (n, 2) sample array, a complex (n,) trace, or
    None for fhat = 1.  dz is the exact parametric tangent increment, so
    the rule is the spectral periodic trapezoid.
    """
    if field is None:
        fhat = np.ones(mesh.n, dtype=complex)
    else:
        field = np.asarray(field)
        fhat = hat_field(field) if field.ndim == 2 else field.astype(complex)
    dz = (mesh.tau[:, 0] + 1j * mesh.tau[:, 1]) * mesh.w
    return complex(np.sum(_weight_values(mesh, weight) * fhat * dz))


def flux_and_circulation(mesh: BoundaryMesh, field) -> tuple:
    """(flux through the boundary, circulation along it) of a real field."""
    field = np.asarray(field)
    flux = float(np.sum((field * mesh.normal).sum(axis=1) * mesh.w))
    circ = float(np.sum((field * mesh.tau).sum(axis=1) * mesh.w))
    return flux, circ


def blasius_pair(mesh: BoundaryMesh, f, g, tangency_tol: float = 1e-8):
    """Force and torque quadratic pairing of two tangent boundary fields.

    Returns (force, torque) with force = integral of (f.g) n ds as a
    2-vector and torque = integral of (f.g) perp(x).n ds, both evaluated
    through the complex route

        force1 + i force2 = i * conj( integral of fhat ghat dz )
        torque            = Re  integral of z fhat ghat dz.

    Both fields must be tangent to the boundary; a normal component above
    ``tangency_tol`` (relative to the field magnitude) is an error, since
    the pairing identities assume tangency.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    for name, v in (("f", f), ("g", g)):
        scale = max(float(np.abs(v).max()), 1e-300)
        worst = float(np.abs((v * mesh.normal).sum(axis=1)).max())
        if worst > tangency_tol * scale:
            raise ValueError(
                f"field {name} is not tangent: max |{name}.n| = {worst:.3e} "
                f"exceeds {tangency_tol:.1e} * max|{name}| = {tangency_tol * scale:.3e}")
    fg = hat_field(f) * hat_field(g)
    force_c = 1j * np.conj(contour_integral(mesh, fg, "1"))
    torque = contour_integral(mesh, fg, "z").real
    return np.array([force_c.real, force_c.imag]), float(torque)


@dataclass(frozen=True)
class IdentityRow:
    name: str
    value: complex
    reference: complex

    @property
    def error(self) -> float:
        return abs(self.value - self.reference)


@dataclass(frozen=True)
class IdentityReport:
    rows: tuple

    @property
    def max_error(self) -> float:
        return max(r.error for r in self.rows)

    def table(self) -> str:
        lines = [f"{'identity':<24}{'value':>28}{'reference':>28}{'abs err':>12}"]
        for r in self.rows:
            val = f"{r.value.real:+.6e}{r.value.imag:+.6e}j"
            ref = f"{r.reference.real:+.6e}{r.reference.imag:+.6e}j"
            lines.append(f"{r.name:<24}{val:>28}{ref:>28}{r.error:>12.3e}")
        lines.append(f"{'max abs error':<24}{'':>28}{'':>28}{self.max_error:>12.3e}")
        return "\n".join(lines)


def identity_suite(mesh: BoundaryMesh) -> IdentityReport:
    """Check the full table of rigid-motion boundary-moment identities.

    Every row is a pure-geometry statement: a quadrature of a polynomial
    moment against one of the data K_1..K_5 (or a complex Stokes integral)
    against its divergence-theorem value in terms of area moments.  All
    rows hold for ANY embedded counterclockwise curve, so the suite is a
    runtime self-check of mesh orientation, weights and normals.
    """
    mom = geometric_moments(mesh)
    area, (g1, g2) = mom.area, mom.centroid
    m_diff, m_cross, m_polar = mom.m_diff, mom.m_cross, mom.m_polar
    x1, x2 = mesh.x[:, 0], mesh.x[:, 1]
    K = {i: mesh.neumann_data(i) for i in range(1, 6)}
    w = mesh.w

    def real_row(name, integrand, ref):
        return IdentityRow(name, complex(float(np.sum(integrand * w))), complex(ref))

    rows = []
    for i in range(1, 6):
        rows.append(real_row(f"deg0 K{i}", K[i], 0.0))
    rows += [
        real_row("x1 K1", x1 * K[1], -area),
        real_row("x1 K2", x1 * K[2], 0.0),
        real_row("x2 K1", x2 * K[1], 0.0),
        real_row("x2 K2", x2 * K[2], -area),
        real_row("x1 K3", x1 * K[3], area * g2),
        real_row("x2 K3", x2 * K[3], -area * g1),
        real_row("x1 K4", x1 * K[4], area * g1),
        real_row("x2 K4", x2 * K[4], -area * g2),
        real_row("x1 K5", x1 * K[5], -area * g2),
        real_row("x2 K5", x2 * K[5], -area * g1),
    ]
    r2 = x1 * x1 + x2 * x2
    d2 = x1 * x1 - x2 * x2
    rows += [
        real_row("|x|^2 K1", r2 * K[1], -2 * g1 * area),
        real_row("|x|^2 K2", r2 * K[2], -2 * g2 * area),
        real_row("|x|^2 K3", r2 * K[3], 0.0),
        real_row("x1x2 K1", x1 * x2 * K[1], -area * g2),
        real_row("x1x2 K2", x1 * x2 * K[2], -area * g1),
        real_row("x1x2 K3", x1 * x2 * K[3], -m_diff),
        real_row("(x1^2-x2^2) K1", d2 * K[1], -2 * area * g1),
        real_row("(x1^2-x2^2) K2", d2 * K[2], 2 * area * g2),
        real_row("(x1^2-x2^2) K3", d2 * K[3], 2 * m_cross),
        real_row("|x|^2 K4", r2 * K[4], 2 * m_diff),
        real_row("|x|^2 K5", r2 * K[5], -2 * m_cross),
        real_row("x1x2 K4", x1 * x2 * K[4], 0.0),
        real_row("x1x2 K5", x1 * x2 * K[5], -m_polar),
        real_row("(x1^2-x2^2) K4", d2 * K[4], 2 * m_polar),
        real_row("(x1^2-x2^2) K5", d2 * K[5], 0.0),
    ]
    rows += [
        IdentityRow("stokes zbar dz", contour_integral(mesh, None, "zbar"),
                    2j * area),
        IdentityRow("stokes zbar^2 dz",
                    complex(np.sum(np.conj(mesh.z) ** 2
                                   * (mesh.tau[:, 0] + 1j * mesh.tau[:, 1]) * w)),
                    4 * area * g2 + 4j * area * g1),
        IdentityRow("stokes |z|^2 dz", contour_integral(mesh, None, "abs2"),
                    -2 * area * g2 + 2j * area * g1),
        IdentityRow("stokes z|z|^2 dz", contour_integral(mesh, None, "zabs2"),
                    -2 * m_cross + 2j * m_diff),
    ]
    return IdentityReport(rows=tuple(rows))
