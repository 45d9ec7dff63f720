"""Coupled blob + body dynamics: trivial force cases, the exactly solvable
disk with pure circulation, Green's function against the circle images,
energy conservation under step halving, and frame-change identities."""

import numpy as np
import pytest

from vortexbody.biotsavart import BlobField, velocity_free_space, velocity_gradient
from vortexbody.coupled_system import (
    TimeStepError,
    VorticityPatch,
    accelerations,
    coupled_step,
    force_B,
    force_C,
    green_function,
    init_coupled,
    lab_frame_view,
    total_energy,
)
from vortexbody.geometry import build_mesh, disk, ellipse, perp, rotation
from vortexbody.potential import ScaledPotentials, build_mass_data, build_potential_set

EPS = 0.1
ALPHA = 2.0


@pytest.fixture(scope="module")
def disk_setup():
    pset = build_potential_set(build_mesh(disk(), 256))
    return ScaledPotentials(pset, EPS), build_mass_data(pset)


@pytest.fixture(scope="module")
def ellipse_setup():
    pset = build_potential_set(build_mesh(ellipse(2.0, 1.0), 256))
    return ScaledPotentials(pset, EPS), build_mass_data(pset)


def test_patch_lattice_total_strength():
    patch = VorticityPatch(1.0, 2.0, 1.0, spacing=0.05)
    f = patch.discretize()
    want = 3.0 * np.pi  # pi (2^2 - 1^2) for unit vorticity
    assert abs(f.beta - want) < 5e-3 * want
    assert f.delta == 0.05
    assert f.frame == "body"

    with pytest.raises(ValueError):
        VorticityPatch(2.0, 1.0)
    with pytest.raises(ValueError):
        VorticityPatch(1.0, 2.0, spacing=0.0)


def test_init_preconditions(disk_setup):
    sp, md = disk_setup
    with pytest.raises(ValueError):
        init_coupled(sp, md, alpha=ALPHA, gamma=1.0,
                     patch=VorticityPatch(1.0, 2.0),
                     field=BlobField.empty())
    # support must start beyond twice the body circumradius
    with pytest.raises(ValueError):
        init_coupled(sp, md, alpha=ALPHA, gamma=1.0,
                     field=BlobField(x=[[0.15, 0.0]], gamma=[1.0], delta=0.01))


def test_gamma_zero_warns(disk_setup, caplog):
    sp, md = disk_setup
    with caplog.at_level("WARNING", logger="vortexbody.coupled_system"):
        init_coupled(sp, md, alpha=ALPHA, gamma=0.0)
    assert any("gamma" in rec.message for rec in caplog.records)


def test_empty_field_energy_is_quadratic(disk_setup):
    sp, md = disk_setup
    st = init_coupled(sp, md, alpha=ALPHA, gamma=2 * np.pi, ell0=(1.0, 0.0),
                      r0=0.4)
    p = st.p
    assert abs(total_energy(st) - 0.5 * p @ st.inertia_matrix @ p) < 1e-14


def test_green_function_matches_disk_images(disk_setup):
    sp, md = disk_setup
    y = np.array([0.45, 0.15])
    st = init_coupled(sp, md, alpha=ALPHA, gamma=0.0,
                      field=BlobField(x=[y], gamma=[1.0], delta=1e-6))
    ys = EPS**2 * y / (y @ y)
    for x in ([0.8, -0.3], [0.2, 0.9], [3.0, 1.0]):
        got = green_function(st, x, y)
        x = np.asarray(x)
        want = (np.log(np.hypot(*(x - y)))
                - np.log(np.hypot(*(x - ys)) * np.hypot(*y) / EPS)) / (2 * np.pi)
        assert abs(got - want) < 1e-10


def test_forces_vanish_at_rest(disk_setup):
    sp, md = disk_setup
    st = init_coupled(sp, md, alpha=ALPHA, gamma=3.0)
    assert np.array_equal(force_B(st), np.zeros(3))
    C_a, C_b, C_c = force_C(st)
    assert np.abs(C_a).max() < 1e-13
    assert np.abs(C_c).max() < 1e-12


def test_disk_lift_is_minus_gamma_ell_perp(disk_setup):
    # no vorticity, no spin: the only surviving boundary force on a disk
    # is the circulation lift
    sp, md = disk_setup
    gamma, ell = 3.0, np.array([0.4, -0.2])
    st = init_coupled(sp, md, alpha=ALPHA, gamma=gamma, ell0=ell)
    C_a, C_b, C_c = force_C(st)
    assert np.abs(C_a).max() < 1e-12
    assert np.abs(C_b[:2] - gamma * perp(-ell)).max() < 1e-12
    assert abs(C_b[2]) < 1e-13
    assert np.abs(C_c).max() < 1e-12


def test_ellipse_spin_couple_is_zero_without_flow(ellipse_setup):
    # C_c vanishes identically whatever the shape or motion
    sp, md = ellipse_setup
    st = init_coupled(sp, md, alpha=ALPHA, gamma=2 * np.pi, ell0=(0.3, 0.7),
                      r0=0.9)
    _, _, C_c = force_C(st)
    assert np.abs(C_c).max() < 1e-8


def test_disk_orbit_matches_reduced_ode(disk_setup):
    # disk + circulation and nothing else: M ell' = gamma ell^perp exactly,
    # so the center traces a circle of radius M |ell| / gamma
    sp, md = disk_setup
    gamma = 2 * np.pi
    M = EPS**ALPHA * md.m1 + EPS**2 * np.pi
    st = init_coupled(sp, md, alpha=ALPHA, gamma=gamma, ell0=(1.0, 0.0))

    fb = accelerations(st)
    assert np.abs(fb.accel - [0.0, gamma / M, 0.0]).max() < 1e-11
    assert np.abs(st.inertia_matrix @ fb.accel - fb.total_force).max() < 1e-12

    period = 2 * np.pi * M / gamma
    n = 200
    for _ in range(n // 2):
        st = coupled_step(st, period / n)
    Om = gamma / M
    h_half = (1.0 / Om) * np.array([np.sin(np.pi), 1 - np.cos(np.pi)])
    assert np.abs(st.placement.h - h_half).max() < 1e-6 * (M / gamma)
    for _ in range(n // 2):
        st = coupled_step(st, period / n)
    assert np.abs(st.ell - [1.0, 0.0]).max() < 1e-6
    assert np.abs(st.placement.h).max() < 1e-8
    assert abs(st.r) < 1e-12


def test_disk_spin_is_frozen_even_with_vorticity(disk_setup):
    sp, md = disk_setup
    st = init_coupled(sp, md, alpha=ALPHA, gamma=2 * np.pi, ell0=(0.5, 0.2),
                      r0=0.3, patch=VorticityPatch(1.0, 2.0, spacing=0.2))
    for _ in range(25):
        st = coupled_step(st, 0.002)
    assert abs(st.r - 0.3) < 1e-10


def test_energy_conservation_improves_with_dt(ellipse_setup):
    sp, md = ellipse_setup
    st0 = init_coupled(sp, md, alpha=ALPHA, gamma=2 * np.pi, ell0=(1.0, 0.0),
                       r0=0.5, patch=VorticityPatch(1.0, 2.0, spacing=0.15))
    E0 = total_energy(st0)
    T, n = 0.1, 50

    st = st0
    for _ in range(n):
        st = coupled_step(st, T / n)
    drift_coarse = abs(total_energy(st) - E0) / abs(E0)
    assert drift_coarse < 1e-7

    # blob strengths and the circulation constant are untouched by stepping
    assert np.array_equal(st.field.gamma, st0.field.gamma)
    assert st.gamma == st0.gamma

    st = st0
    for _ in range(2 * n):
        st = coupled_step(st, T / (2 * n))
    drift_fine = abs(total_energy(st) - E0) / abs(E0)
    assert drift_coarse / drift_fine > 12.0


def test_frame_change_identities(ellipse_setup):
    # after a few steps the body has genuinely moved; the body-frame blob
    # kernel samples must match the lab-frame ones conjugated by the
    # attitude, and the origin gradient matches a finite-difference probe
    sp, md = ellipse_setup
    st = init_coupled(sp, md, alpha=ALPHA, gamma=2 * np.pi, ell0=(1.0, 0.0),
                      r0=0.5, patch=VorticityPatch(1.0, 2.0, spacing=0.2))
    for _ in range(5):
        st = coupled_step(st, 0.002)
    assert abs(st.placement.theta) > 0.0

    view = lab_frame_view(st)
    R = rotation(st.placement.theta)

    k_body = velocity_free_space(st.field, [0.0, 0.0])[0]
    k_lab = velocity_free_space(view.field, view.h)[0]
    assert np.abs(k_body - R.T @ k_lab).max() < 1e-12

    g_body = velocity_gradient(st.field, [0.0, 0.0]).matrix
    g_lab = velocity_gradient(view.field, view.h).matrix
    assert np.abs(g_body - R.T @ g_lab @ R).max() < 1e-12

    h_ = 1e-6
    J = np.zeros((2, 2))
    for k in range(2):
        d = np.zeros(2)
        d[k] = h_
        J[:, k] = (velocity_free_space(view.field, view.h + d)[0]
                   - velocity_free_space(view.field, view.h - d)[0]) / (2 * h_)
    assert np.abs(g_lab - 0.5 * (J + J.T)).max() < 1e-8

    pl = st.placement
    assert np.abs(pl.to_lab(pl.to_body(view.field.x)) - view.field.x).max() < 1e-12
    assert np.allclose(view.h_dot, R @ st.ell, atol=1e-15)


def test_step_guard_rejects_reckless_dt(ellipse_setup):
    sp, md = ellipse_setup
    st = init_coupled(sp, md, alpha=ALPHA, gamma=2 * np.pi, ell0=(1.0, 0.0),
                      r0=0.5, patch=VorticityPatch(1.0, 2.0, spacing=0.2))
    with pytest.raises(TimeStepError):
        coupled_step(st, 5.0)
    with pytest.raises(ValueError):
        coupled_step(st, 0.0)
