"""Exterior potential theory on a body boundary: Kirchhoff potentials,
the unit-circulation harmonic field, added-mass data and Laurent tails.

Everything is built from one single-layer representation,

    u(x) = integral over the boundary of (1/2pi) ln|x - y| sigma(y) ds(y),

with two boundary operators on the periodic parameter grid:

* the fluid-side normal derivative  d_n u = -sigma/2 + K' sigma, a
  second-kind equation with a smooth (curvature-limited) kernel, solved
  by plain Nystrom-trapezoid; invertible, no bordering needed, and
  compatible data automatically produces a zero-total-density (hence
  decaying) potential;
* the on-curve values V sigma, whose kernel has the periodic log
  singularity.  V splits as (1/4pi) ln(4 sin^2((s-t)/2)) plus an analytic
  remainder; the log part is integrated exactly mode-by-mode (symbol
  -2pi/|k|), the remainder by trapezoid.  The first-kind Dirichlet system
  V sigma + c = f with the zero-mean side condition is bordered by one
  row/column and LU-factored once per mesh.

All solves on scaled copies of a shape reduce to the unit-shape operators
because the Neumann kernel is scale-invariant; :class:`ScaledPotentials`
implements those scaling laws.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .contour import contour_integral, hat_field
from .geometry import BoundaryMesh, MomentSet, build_mesh, geometric_moments, perp

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# periodic spectral helpers


def log_quadrature_matrix(n: int) -> np.ndarray:
    """Dense rule for f -> integral of ln(4 sin^2((s_i - t)/2)) f(t) dt.

    Exact for trigonometric polynomials of degree < n/2: the kernel acts
    diagonally in Fourier space with symbol -2pi/|k| (zero mean part).
    """
    lam = np.zeros(n)
    k = np.fft.fftfreq(n, d=1.0 / n)
    nz = k != 0
    lam[nz] = -TWO_PI / np.abs(k[nz])
    col = np.fft.ifft(lam).real
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def spectral_derivative(values: np.ndarray) -> np.ndarray:
    """d/ds of periodic samples on the uniform parameter grid."""
    n = len(values)
    k = np.fft.rfftfreq(n, d=1.0 / n)
    fk = np.fft.rfft(values)
    fk *= 1j * k
    if n % 2 == 0:
        fk[-1] = 0.0  # drop the unpaired Nyquist mode
    return np.fft.irfft(fk, n)


# ---------------------------------------------------------------------------
# free-space log-kernel sums (shared by evaluators)


def _pairwise(points, nodes):
    d = np.asarray(points, dtype=float).reshape(-1, 2)[:, None, :] - nodes[None, :, :]
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    return d, r2


def log_potential_sum(points, nodes, charges) -> np.ndarray:
    """sum_j charges_j (1/2pi) ln|p - y_j| at each point p."""
    _, r2 = _pairwise(points, nodes)
    return (0.25 / np.pi) * (np.log(r2) @ charges)


def log_gradient_sum(points, nodes, charges) -> np.ndarray:
    """Gradient of log_potential_sum, rows aligned with points."""
    d, r2 = _pairwise(points, nodes)
    coef = charges / TWO_PI
    return np.stack([
        (d[..., 0] / r2) @ coef,
        (d[..., 1] / r2) @ coef,
    ], axis=-1)


# ---------------------------------------------------------------------------
# boundary operators


class BoundaryOperators:
    """Factored Nystrom operators for one mesh, reused by every solve."""

    def __init__(self, mesh: BoundaryMesh):
        self.mesh = mesh
        n = mesh.n
        x, nv, speed, w = mesh.x, mesh.normal, mesh.speed, mesh.w
        h = TWO_PI / n

        d1 = x[:, None, 0] - x[None, :, 0]
        d2 = x[:, None, 1] - x[None, :, 1]
        r2 = d1 ** 2 + d2 ** 2

        # fluid-side normal derivative: A = -I/2 + K', curvature diagonal
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = (nv[:, None, 0] * d1 + nv[:, None, 1] * d2) / r2
        diag = -(nv * mesh.xpp).sum(axis=1) / (2.0 * speed ** 2)
        np.fill_diagonal(kern, diag)
        self.A = -0.5 * np.eye(n) + (h / TWO_PI) * kern * speed[None, :]
        self._lu_neumann = lu_factor(self.A)

        # on-curve single-layer values: spectral log split
        ds = mesh.s[:, None] - mesh.s[None, :]
        sin2 = 4.0 * np.sin(0.5 * ds) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            smooth = np.log(r2 / sin2)
        np.fill_diagonal(smooth, 2.0 * np.log(speed))
        self.V = ((log_quadrature_matrix(n) + h * smooth) / (2.0 * TWO_PI)
                  * speed[None, :])

        # bordered first-kind Dirichlet system enforcing zero total density
        B = np.zeros((n + 1, n + 1))
        B[:n, :n] = self.V
        B[:n, n] = 1.0
        B[n, :n] = w
        self._lu_dirichlet = lu_factor(B)

    # -- solves ------------------------------------------------------------

    def neumann_density(self, g: np.ndarray, compat_tol: float = 1e-10) -> np.ndarray:
        """Density sigma with fluid-side d_n(S sigma) = g on the boundary.

        g must satisfy the zero-total-flux compatibility condition; the
        residual total is checked relative to the data size.
        """
        g = np.asarray(g, dtype=float)
        total = float(np.sum(g * self.mesh.w))
        # relative to the data size, with an absolute floor so that
        # identically-zero data (a symmetric datum on a symmetric shape)
        # passes cleanly
        scale = float(np.sum(np.abs(g) * self.mesh.w)) + 1.0
        if abs(total) > compat_tol * scale:
            raise ValueError(
                f"incompatible Neumann data: net flux {total:.3e} "
                f"(relative {abs(total) / scale:.3e})")
        return lu_solve(self._lu_neumann, g)

    def dirichlet_density(self, f: np.ndarray):
        """(sigma, c) with S sigma + c = f on the boundary, sum sigma w = 0."""
        rhs = np.concatenate([np.asarray(f, dtype=float), [0.0]])
        sol = lu_solve(self._lu_dirichlet, rhs)
        return sol[:-1], float(sol[-1])

    # -- boundary traces ----------------------------------------------------

    def layer_values(self, sigma: np.ndarray) -> np.ndarray:
        return self.V @ sigma

    def layer_normal_derivative(self, sigma: np.ndarray) -> np.ndarray:
        return self.A @ sigma

    def arc_derivative(self, boundary_values: np.ndarray) -> np.ndarray:
        """Tangential (arc-length) derivative of on-curve values."""
        return spectral_derivative(boundary_values) / self.mesh.speed


# ---------------------------------------------------------------------------
# solution objects


@dataclass(frozen=True)
class NeumannSolution:
    """Decaying exterior harmonic with prescribed fluid-side d_n data."""

    mesh: BoundaryMesh
    data: np.ndarray
    density: np.ndarray
    boundary_values: np.ndarray
    _ops: BoundaryOperators

    @property
    def charges(self) -> np.ndarray:
        return self.density * self.mesh.w

    @property
    def data_residual(self) -> float:
        """Max-norm residual of the discrete normal-derivative equation."""
        return float(np.abs(self._ops.A @ self.density - self.data).max())

    def potential(self, points) -> np.ndarray:
        return log_potential_sum(points, self.mesh.x, self.charges)

    def gradient(self, points) -> np.ndarray:
        return log_gradient_sum(points, self.mesh.x, self.charges)

    def boundary_trace(self) -> np.ndarray:
        """Fluid-side gradient on the boundary: tangential part from the
        spectral derivative of the values, normal part from the data."""
        dt = self._ops.arc_derivative(self.boundary_values)
        return dt[:, None] * self.mesh.tau + self.data[:, None] * self.mesh.normal


def solve_exterior_neumann(mesh: BoundaryMesh, data, *,
                           ops: BoundaryOperators | None = None,
                           compat_tol: float = 1e-10) -> NeumannSolution:
    ops = ops or BoundaryOperators(mesh)
    g = np.asarray(data, dtype=float)
    sigma = ops.neumann_density(g, compat_tol)
    return NeumannSolution(mesh=mesh, data=g, density=sigma,
                           boundary_values=ops.layer_values(sigma), _ops=ops)


@dataclass(frozen=True)
class HarmonicField:
    """The unit-circulation, zero-flux harmonic velocity field.

    Built as perp-grad of a stream function (1/2pi) ln|x - x0| + S sigma + c
    vanishing on the boundary: circulation one comes from the unit log
    coefficient, tangency from the boundary condition.
    """

    mesh: BoundaryMesh
    pole: np.ndarray          # interior point carrying the log
    density: np.ndarray
    constant: float
    _ops: BoundaryOperators

    @property
    def charges(self) -> np.ndarray:
        return self.density * self.mesh.w

    def stream(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        base = (0.25 / np.pi) * np.log(((pts - self.pole) ** 2).sum(axis=1))
        return base + log_potential_sum(pts, self.mesh.x, self.charges) + self.constant

    def velocity(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        d = pts - self.pole
        r2 = (d ** 2).sum(axis=1)
        base = perp(d) / (TWO_PI * r2[:, None])
        return base + perp(log_gradient_sum(pts, self.mesh.x, self.charges))

    def normal_stream_derivative(self) -> np.ndarray:
        d = self.mesh.x - self.pole
        r2 = (d ** 2).sum(axis=1)
        base = (self.mesh.normal * d).sum(axis=1) / (TWO_PI * r2)
        return base + self._ops.layer_normal_derivative(self.density)

    def boundary_trace(self) -> np.ndarray:
        """On the boundary the stream vanishes, so the field is tangent:
        H = -(d_n stream) tau."""
        return -self.normal_stream_derivative()[:, None] * self.mesh.tau

    def circulation(self) -> float:
        trace = self.boundary_trace()
        return float(np.sum((trace * self.mesh.tau).sum(axis=1) * self.mesh.w))


def harmonic_field(mesh: BoundaryMesh, *,
                   ops: BoundaryOperators | None = None) -> HarmonicField:
    ops = ops or BoundaryOperators(mesh)
    pole = mesh.interior_point
    d = mesh.x - pole
    f = -(0.25 / np.pi) * np.log((d ** 2).sum(axis=1))
    sigma, const = ops.dirichlet_density(f)
    return HarmonicField(mesh=mesh, pole=pole, density=sigma,
                         constant=const, _ops=ops)


# ---------------------------------------------------------------------------
# Laurent tails


def laurent_coefficients(solution, k_max: int, radius: float | None = None,
                         n_samples: int = 256) -> np.ndarray:
    """Coefficients c_1..c_k_max of the decaying tail sum_k c_k / z^k.

    ``solution`` is a :class:`NeumannSolution` (tail of the hatted
    gradient), a :class:`HarmonicField` (tail of the hatted velocity), or
    a callable mapping an (m, 2) point array to complex samples.  The
    extraction contour is |z| = radius (default three body circumradii),
    integrated by the periodic trapezoid, spectral for fields holomorphic
    outside the body.
    """
    if callable(solution) and not hasattr(solution, "mesh"):
        fhat = solution
        if radius is None:
            raise ValueError("a radius is required with a bare evaluator")
    else:
        mesh = solution.mesh
        if radius is None:
            radius = 3.0 * mesh.circumradius
        if radius <= mesh.circumradius:
            raise ValueError("extraction circle intersects the body")
        if isinstance(solution, HarmonicField):
            fhat = lambda p: hat_field(solution.velocity(p))
        else:
            fhat = lambda p: hat_field(solution.gradient(p))
    theta = np.arange(n_samples) * (TWO_PI / n_samples)
    pts = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    vals = np.asarray(fhat(pts), dtype=complex)
    # c_k = (1/2pi) int fhat(R e^{i t}) R^k e^{i k t} dt
    ks = np.arange(1, k_max + 1)
    phases = np.exp(1j * np.outer(ks, theta))
    return (radius ** ks) * (phases @ vals) / n_samples


# ---------------------------------------------------------------------------
# the bundled potential set


@dataclass(frozen=True)
class PotentialSet:
    """All unit-scale boundary solves for one shape, plus derived constants.

    ``mass`` is the 5x5 Gram matrix of the Kirchhoff potentials (indices
    1..5 mapped to 0..4), computed from the Green-identity boundary form;
    ``conformal_center`` and ``h_second_moment`` are the first two complex
    moments of the harmonic field over the body contour.
    """

    mesh: BoundaryMesh
    ops: BoundaryOperators
    phi: tuple                      # five NeumannSolution objects
    H: HarmonicField
    mass: np.ndarray                # (5, 5)
    mass_defect: float              # max |m_ij - m_ji| before symmetrization
    conformal_center: complex
    h_second_moment: complex
    moments: MomentSet

    @property
    def added_mass_3x3(self) -> np.ndarray:
        return self.mass[:3, :3]

    @property
    def added_mass_2x2(self) -> np.ndarray:
        return self.mass[:2, :2]


def build_potential_set(mesh: BoundaryMesh,
                        cache_dir: str | Path | None = None) -> PotentialSet:
    """Solve the five exterior Neumann problems and the harmonic field.

    With ``cache_dir`` set, densities and derived constants are stored in
    an .npz file keyed by the shape digest and panel count, and reused on
    the next call for the same mesh.
    """
    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"potentials-{mesh.digest()}.npz"
    ops = BoundaryOperators(mesh)

    if cache_file is not None and cache_file.exists():
        blob = np.load(cache_file)
        if str(blob["key"]) == mesh.digest():
            phi = tuple(
                NeumannSolution(mesh=mesh, data=mesh.neumann_data(i + 1),
                                density=blob["sigma"][i],
                                boundary_values=blob["values"][i], _ops=ops)
                for i in range(5))
            H = HarmonicField(mesh=mesh, pole=blob["pole"],
                              density=blob["sigma_h"],
                              constant=float(blob["const_h"]), _ops=ops)
            return PotentialSet(
                mesh=mesh, ops=ops, phi=phi, H=H, mass=blob["mass"],
                mass_defect=float(blob["mass_defect"]),
                conformal_center=complex(blob["xi"]),
                h_second_moment=complex(blob["eta"]),
                moments=geometric_moments(mesh))

    phi = tuple(solve_exterior_neumann(mesh, mesh.neumann_data(i), ops=ops)
                for i in range(1, 6))
    H = harmonic_field(mesh, ops=ops)

    raw = np.empty((5, 5))
    for i in range(5):
        for j in range(5):
            raw[i, j] = np.sum(phi[i].boundary_values
                               * mesh.neumann_data(j + 1) * mesh.w)
    mass_defect = float(np.abs(raw - raw.T).max())
    mass = 0.5 * (raw + raw.T)

    h_hat = hat_field(H.boundary_trace())
    xi = contour_integral(mesh, h_hat, "z")
    eta = contour_integral(mesh, h_hat, "z2")

    pset = PotentialSet(mesh=mesh, ops=ops, phi=phi, H=H, mass=mass,
                        mass_defect=mass_defect, conformal_center=xi,
                        h_second_moment=eta, moments=geometric_moments(mesh))
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        np.savez(cache_file, key=mesh.digest(),
                 sigma=np.stack([p.density for p in phi]),
                 values=np.stack([p.boundary_values for p in phi]),
                 sigma_h=H.density, const_h=H.constant, pole=H.pole,
                 mass=mass, mass_defect=mass_defect, xi=xi, eta=eta)
    return pset


# ---------------------------------------------------------------------------
# complex moment quadratures and their closed forms


def moment_integrals(solution, mesh: BoundaryMesh | None = None) -> dict:
    """Contour quadratures of z, zbar, |z|^2 and z^2 against the solution's
    hatted boundary field (gradient trace, or velocity trace for the
    harmonic field)."""
    mesh = mesh or solution.mesh
    fhat = hat_field(solution.boundary_trace())
    return {w: contour_integral(mesh, fhat, w) for w in ("z", "zbar", "abs2", "z2")}


def moment_closed_forms(pset: PotentialSet, i: int) -> dict:
    """Divergence-theorem values of the same four quadratures.

    Every entry combines tangential integration by parts (producing mass
    entries m_ij) with the rigid-datum moment table (producing area and
    centroid terms); see the identity suite for the latter.
    """
    m = pset.mass
    mom = pset.moments
    area, (g1, g2) = mom.area, mom.centroid
    m_diff, m_cross, m_polar = mom.m_diff, mom.m_cross, mom.m_polar

    def mm(a, b):
        return m[a - 1, b - 1]

    if i in (1, 2):
        z = complex(-mm(i, 2) - (area if i == 2 else 0.0),
                    mm(i, 1) + (area if i == 1 else 0.0))
        zbar = complex(-mm(i, 2) + (area if i == 2 else 0.0),
                       -mm(i, 1) + (area if i == 1 else 0.0))
        abs2 = complex(-2 * mm(i, 3), 2 * area * (g1 if i == 1 else g2))
        if i == 1:
            z2 = complex(-2 * (mm(1, 5) + area * g2), 2 * (-mm(1, 4) + area * g1))
        else:
            z2 = complex(-2 * (mm(2, 5) + area * g1), -2 * (mm(2, 4) + area * g2))
    elif i == 3:
        z = complex(-(mm(3, 2) + area * g1), mm(3, 1) - area * g2)
        zbar = complex(-mm(3, 2) + area * g1, -(mm(3, 1) + area * g2))
        abs2 = complex(-2 * mm(3, 3), 0.0)
        z2 = complex(-2 * (mm(3, 5) + m_diff), -2 * (mm(3, 4) + m_cross))
    elif i == 4:
        z = complex(-(mm(4, 2) + area * g2), mm(4, 1) - area * g1)
        zbar = complex(-mm(4, 2) + area * g2, -(mm(4, 1) + area * g1))
        abs2 = complex(-2 * mm(4, 3), -2 * m_diff)
        z2 = complex(-2 * mm(4, 5), -2 * (mm(4, 4) + m_polar))
    elif i == 5:
        z = complex(-(mm(5, 2) + area * g1), mm(5, 1) + area * g2)
        zbar = complex(-mm(5, 2) + area * g1, -mm(5, 1) + area * g2)
        abs2 = complex(-2 * mm(5, 3), 2 * m_cross)
        z2 = complex(-2 * (mm(5, 5) + m_polar), -2 * mm(5, 4))
    else:
        raise ValueError("potential index must be 1..5")
    return {"z": z, "zbar": zbar, "abs2": abs2, "z2": z2}


def field_identity_rows(pset: PotentialSet) -> list:
    """Identity rows tying the solved fields to their closed forms: the
    four contour moments of each Kirchhoff gradient against the mass and
    geometric data, plus the conjugation/reality constraints on the
    harmonic-field moments.  Complements the pure-geometry suite."""
    from .contour import IdentityRow

    rows = []
    for i in range(1, 6):
        quad = moment_integrals(pset.phi[i - 1])
        closed = moment_closed_forms(pset, i)
        for w in ("z", "zbar", "abs2", "z2"):
            rows.append(IdentityRow(f"phi{i} moment {w}", quad[w], closed[w]))
    h_hat = hat_field(pset.H.boundary_trace())
    z_mom = contour_integral(pset.mesh, h_hat, "z")
    zbar_mom = contour_integral(pset.mesh, h_hat, "zbar")
    abs2_mom = contour_integral(pset.mesh, h_hat, "abs2")
    rows.append(IdentityRow("H conj(zbar mom) = z mom", np.conj(zbar_mom), z_mom))
    rows.append(IdentityRow("H Re(i |z|^2 mom) = 0", (1j * abs2_mom).real, 0.0))
    # shape-independent residue of the squared harmonic field
    rows.append(IdentityRow("z (H hat)^2 moment",
                            contour_integral(pset.mesh, h_hat ** 2, "z"),
                            -0.5j / np.pi))
    return rows


# ---------------------------------------------------------------------------
# named wrappers and the inertia bundle


def mass_matrix(potentials: PotentialSet,
                mesh: BoundaryMesh | None = None) -> np.ndarray:
    """The 5x5 Gram matrix of the Kirchhoff potential gradients.

    Computed by the boundary form: the fluid-volume inner product of
    grad phi_i and grad phi_j reduces to the contour integral of phi_i
    times the j-th rigid datum, with sign pinned by the disk value pi.
    """
    return potentials.mass


def conformal_center_eta(H_or_set, mesh: BoundaryMesh | None = None):
    """(xi, eta) as real 2-vectors: the first two complex contour moments
    of the harmonic field, components (real part, imaginary part)."""
    if isinstance(H_or_set, PotentialSet):
        xi_c = H_or_set.conformal_center
        eta_c = H_or_set.h_second_moment
    else:
        mesh = mesh or H_or_set.mesh
        h_hat = hat_field(H_or_set.boundary_trace())
        xi_c = contour_integral(mesh, h_hat, "z")
        eta_c = contour_integral(mesh, h_hat, "z2")
    return (np.array([xi_c.real, xi_c.imag]),
            np.array([eta_c.real, eta_c.imag]))


@dataclass(frozen=True)
class MassData:
    """Inertia bundle for one shape: boundary-derived mass coefficients,
    the genuine-mass inputs, and the scale/regime assembly rules.

    ``mass`` holds the unit-scale coefficients; entries pick up
    eps^(2 + [i>=3] + [j>=3]) at scale eps.  ``m1`` and ``J1`` are the
    unit-scale body mass and moment of inertia (inputs, not derived from
    the fluid), entering at eps^alpha and eps^(alpha+2).
    """

    mass: np.ndarray            # (5, 5) symmetric
    m1: float
    J1: float
    xi: np.ndarray              # (2,)
    eta: np.ndarray             # (2,)
    moments: MomentSet

    @property
    def added_3x3(self) -> np.ndarray:
        return self.mass[:3, :3]

    @property
    def added_2x2(self) -> np.ndarray:
        return self.mass[:2, :2]

    @property
    def genuine(self) -> np.ndarray:
        return np.diag([self.m1, self.m1, self.J1])

    @property
    def mu(self) -> np.ndarray:
        m = self.mass
        return np.array([m[0, 2], m[1, 2], 0.0])

    @property
    def mu_hat(self) -> np.ndarray:
        m = self.mass
        return np.array([2 * m[1, 4] - m[2, 1] + m[0, 3],
                         -2 * m[0, 4] - m[2, 0] + m[3, 1],
                         0.0])

    @property
    def mu_check(self) -> np.ndarray:
        m = self.mass
        return np.array([-2 * m[1, 3] - m[2, 0] + m[4, 0],
                         2 * m[0, 3] + m[2, 1] + m[4, 1],
                         0.0])

    @staticmethod
    def scale_operator(eps: float) -> np.ndarray:
        return np.diag([1.0, 1.0, eps])

    def total_mass(self, eps: float, alpha: float) -> np.ndarray:
        """eps^alpha I M_g I + eps^2 I M_a I with I = diag(1, 1, eps)."""
        I = self.scale_operator(eps)
        return (eps ** alpha * I @ self.genuine @ I
                + eps ** 2 * I @ self.added_3x3 @ I)

    def total_mass_rotated(self, eps: float, alpha: float,
                           theta: float) -> np.ndarray:
        """The same inertia expressed in a frame rotated by theta."""
        from .geometry import rotation
        Q = np.eye(3)
        Q[:2, :2] = rotation(theta)
        return Q @ self.total_mass(eps, alpha) @ Q.T


def build_mass_data(pset: PotentialSet, m1: float = 1.0,
                    J1: float = 1.0) -> MassData:
    xi, eta = conformal_center_eta(pset)
    return MassData(mass=pset.mass, m1=float(m1), J1=float(J1),
                    xi=xi, eta=eta, moments=pset.moments)


# ---------------------------------------------------------------------------
# scaling laws


@dataclass(frozen=True)
class ScaledPotentials:
    """Exact eps-scalings of a unit-shape potential set.

    grad phi_i at scale eps is eps^0 (i = 1, 2) or eps^1 (i = 3, 4, 5)
    times the unit gradient at x/eps; H scales like 1/eps, its stream
    like eps^0; mass entries pick up eps^(2 + [i>=3] + [j>=3]).
    """

    base: PotentialSet
    eps: float

    def scaled_mesh(self) -> BoundaryMesh:
        return build_mesh(self.base.mesh.shape.scaled(self.eps), self.base.mesh.n)

    def _pow(self, i: int) -> float:
        return self.eps if i >= 3 else 1.0

    def phi_gradient(self, i: int, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float) / self.eps
        return self._pow(i) * self.base.phi[i - 1].gradient(pts)

    def phi_boundary_trace(self, i: int) -> np.ndarray:
        return self._pow(i) * self.base.phi[i - 1].boundary_trace()

    def h_velocity(self, points) -> np.ndarray:
        return self.base.H.velocity(np.asarray(points, dtype=float) / self.eps) / self.eps

    def h_stream(self, points) -> np.ndarray:
        return self.base.H.stream(np.asarray(points, dtype=float) / self.eps)

    def h_boundary_trace(self) -> np.ndarray:
        return self.base.H.boundary_trace() / self.eps

    @property
    def mass(self) -> np.ndarray:
        p = np.array([0, 0, 1, 1, 1])
        return (self.base.mass
                * self.eps ** (2 + p[:, None] + p[None, :]))

    @property
    def area(self) -> float:
        return self.base.moments.area * self.eps ** 2

    @property
    def centroid(self) -> np.ndarray:
        return self.base.moments.centroid * self.eps

    @property
    def m_diff(self) -> float:
        return self.base.moments.m_diff * self.eps ** 4

    @property
    def m_cross(self) -> float:
        return self.base.moments.m_cross * self.eps ** 4

    @property
    def m_polar(self) -> float:
        return self.base.moments.m_polar * self.eps ** 4
