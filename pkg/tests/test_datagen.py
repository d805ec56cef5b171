import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from perihorizon.datagen import (
    CollocationSet,
    ForwardProblem1D,
    PlateProblem,
    StabilityError,
    build_collocation,
    build_collocation_1d,
    build_collocation_2d,
    dispersion,
    exact_solution_2d,
    forward_solve_1d,
    interaction_matrix,
    mode_denominator,
    solver_grid,
    source_term_2d,
    stable_dt,
    verlet_energy,
    zero_field,
)
from perihorizon.kernels import KernelSpec


def bessel_denominator(delta):
    # the angular integral of cos(a r cos p) cos(a r sin p) is 2 pi J0(sqrt(2) a r)
    return integrate.quad(lambda r: 2 * math.pi * (1 - special.j0(math.sqrt(2) * math.pi * r)), 0, delta, epsabs=1e-15, epsrel=1e-13)[0]


# -- dispersion


def test_dispersion_at_zero_wavenumber():
    for k in (KernelSpec.tent(1.0), KernelSpec.vshape(0.6, 10.0), KernelSpec.gauss(1.0, 1.0)):
        assert dispersion(k, 0.0) == (0.0, 0.0)


def test_tent_dispersion_closed_form():
    m, w = dispersion(KernelSpec.tent(1.0), math.pi)
    assert m == pytest.approx(1 - 4 / math.pi**2, abs=1e-10)
    assert w == pytest.approx(math.sqrt(1 - 4 / math.pi**2), abs=1e-10)


def test_vshape_dispersion_approaches_kernel_mass():
    m, _ = dispersion(KernelSpec.vshape(0.6, 10.0), 1e3)
    assert m == pytest.approx(60.0, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(k=st.floats(0, 50), delta=st.floats(0.2, 5))
def test_dispersion_even_and_nonnegative(k, delta):
    for kern in (KernelSpec.tent(delta), KernelSpec.vshape(0.6, delta)):
        assert dispersion(kern, k)[0] >= 0
        assert dispersion(kern, -k)[0] == pytest.approx(dispersion(kern, k)[0], rel=1e-12, abs=1e-14)


def test_distributed_dispersion_needs_truncation():
    with pytest.raises(ValueError, match="truncation"):
        dispersion(KernelSpec.distributed(10.0, 1.0), 1.0)
    assert dispersion(KernelSpec.distributed(10.0, 1.0), 1.0, truncation=10.0)[0] > 0


# -- forward solver


def test_zero_initial_data_stays_zero():
    p = ForwardProblem1D.default(KernelSpec.tent(1.0), u0=zero_field)
    _, _, u = forward_solve_1d(p, 20, 5, refine=2)
    assert np.all(u == 0.0)


def test_constant_initial_data_stays_constant():
    p = ForwardProblem1D.default(KernelSpec.vshape(0.6, 10.0), u0=lambda x: np.full_like(x, 2.5))
    _, _, u = forward_solve_1d(p, 20, 5, refine=2)
    assert np.allclose(u, 2.5, atol=1e-12)


def test_interaction_matrix_rows_carry_kernel_mass():
    p = ForwardProblem1D.default(KernelSpec.tent(1.0))
    grid = solver_grid(p, 161)
    K = interaction_matrix(p, grid)
    assert K.sum(axis=1)[80] == pytest.approx(1.0, rel=1e-12)
    assert K.sum(axis=1)[0] == pytest.approx(0.5, rel=1e-12)


def test_plane_wave_phase_matches_dispersion():
    k = 2 * math.pi / 8.0
    kern = KernelSpec.tent(1.0)
    p = ForwardProblem1D(kern, (-4.0, 4.0), 1.0, u0=lambda x: np.cos(k * x), periodic=True)
    x, t, u = forward_solve_1d(p, 64, 11)
    omega = dispersion(kern, k)[1]
    exact = np.cos(k * x)[:, None] * np.cos(omega * t)[None, :]
    err = np.linalg.norm(u[:, -1] - exact[:, -1]) / np.linalg.norm(exact[:, -1])
    assert err < 1e-2


def test_stability_bound_is_enforced():
    p = ForwardProblem1D.default(KernelSpec.vshape(0.6, 10.0))
    K = interaction_matrix(p, solver_grid(p, 49))
    with pytest.raises(StabilityError, match="need dt"):
        forward_solve_1d(p, 49, 3, dt=2 * stable_dt(K))


def test_verlet_energy_has_no_secular_growth():
    p = ForwardProblem1D.default(KernelSpec.vshape(0.6, 10.0))
    _, e = verlet_energy(p, 50, 41, refine=4)
    drift = np.abs(e - e[0]) / abs(e[0])
    assert drift.max() < 0.02
    assert drift[-1] < 2 * drift[: len(drift) // 2].max() + 1e-12


def test_problem_validation():
    with pytest.raises(ValueError, match="4 \\* delta"):
        ForwardProblem1D(KernelSpec.tent(1.0), (-1.0, 1.0))


# -- 2D plate


def test_source_term_values():
    assert source_term_2d(0.5, 0.5) == pytest.approx(-0.05)
    assert source_term_2d(0.0, 0.3) == pytest.approx(0.0, abs=1e-18)
    assert source_term_2d(0.25, 0.75) == pytest.approx(-0.025)


def test_mode_denominator_matches_bessel_oracle():
    for delta in (0.01, 0.1, 0.3):
        assert mode_denominator(math.pi, math.pi, delta) == pytest.approx(bessel_denominator(delta), rel=1e-12)


def test_mode_denominator_small_delta_asymptote():
    delta = 1e-3
    assert mode_denominator(math.pi, math.pi, delta) == pytest.approx(math.pi * 2 * math.pi**2 * delta**3 / 6, rel=1e-5)


def test_exact_solution_centre_value():
    delta = 0.1
    oracle = -0.05 * (math.pi * delta**3 / 6) / bessel_denominator(delta)
    assert exact_solution_2d(0.5, 0.5, delta) == pytest.approx(oracle, abs=1e-8)
    assert exact_solution_2d(0.5, 0.5, delta) == pytest.approx(-2.533e-3, rel=0.01)


def test_exact_solution_small_delta_limit():
    assert exact_solution_2d(0.5, 0.5, 0.01) == pytest.approx(-0.05 / (2 * math.pi**2), rel=5e-3)


def test_exact_solution_vanishes_on_edges_and_is_symmetric():
    assert exact_solution_2d(0.0, 0.4, 0.1) == pytest.approx(0.0, abs=1e-18)
    assert exact_solution_2d(0.2, 0.7, 0.1) == pytest.approx(exact_solution_2d(0.7, 0.2, 0.1), rel=1e-14)


def test_truncation_adds_nothing():
    xs = np.linspace(0.05, 0.95, 7)
    one = exact_solution_2d(xs, xs[::-1], 0.1)
    fifty = exact_solution_2d(xs, xs[::-1], 0.1, 50, 50)
    assert np.max(np.abs(one - fifty)) <= 1e-15


# -- collocation


def test_collocation_counts_1d():
    p = ForwardProblem1D.default(KernelSpec.tent(1.0))
    data = build_collocation_1d(p, nx=3, nt=2, refine=2)
    assert len(data) == 6
    assert int(data.data_mask.sum()) == 6
    assert set(data.roles[data.coords[:, 1] == 0.0]) == {"initial"}


def test_collocation_targets_regenerate():
    p = ForwardProblem1D.default(KernelSpec.vshape(0.6, 10.0))
    data = build_collocation_1d(p, nx=10, nt=4, refine=4)
    _, _, u = forward_solve_1d(p, 10, 4, refine=4)
    assert np.array_equal(data.targets, u.ravel())
    assert np.array_equal(data.targets[data.coords[:, 1] == 0.0], p.u0(data.coords[data.coords[:, 1] == 0.0, 0]))


def test_collocation_is_deterministic():
    p = ForwardProblem1D.default(KernelSpec.tent(1.0))
    a = build_collocation(p, (8, 4, 2), seed=3)
    b = build_collocation(p, (8, 4, 2), seed=3)
    assert np.array_equal(a.coords, b.coords) and np.array_equal(a.targets, b.targets)


def test_ghost_pairs_mirror_the_plate_edges():
    problem = PlateProblem()
    data = build_collocation_2d(problem, n=4, ghost_samples=5)
    first, second = data.ghost_pairs()
    assert first.size == 5 * 4 * 4
    p, q = data.coords[first], data.coords[second]
    a, b = problem.a, problem.b
    mirrored = (
        np.isclose(p[:, 0], -q[:, 0]) & np.isclose(p[:, 1], q[:, 1])
        | np.isclose(p[:, 0] - a, a - q[:, 0]) & np.isclose(p[:, 1], q[:, 1])
        | np.isclose(p[:, 1], -q[:, 1]) & np.isclose(p[:, 0], q[:, 0])
        | np.isclose(p[:, 1] - b, b - q[:, 1]) & np.isclose(p[:, 0], q[:, 0])
    )
    assert mirrored.all()
    assert np.all(data.interior_mask == (data.roles == "interior"))
    interior = data.coords[data.interior_mask]
    assert np.all((interior > 0) & (interior < 1))


def test_collocation_rejects_unknown_roles():
    with pytest.raises(ValueError, match="unknown roles"):
        CollocationSet(np.zeros((1, 2)), ["edge"], [0.0], [-1])


def test_build_collocation_rejects_unknown_problem():
    with pytest.raises(TypeError):
        build_collocation(object(), (1, 1))
