import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from qdemu.errors import NumericalError
from qdemu.metrics import normalized_correlation
from qdemu.sim import (
    GaussianPacketSpec, PotentialSpec, SimGrid, Trajectory, center_of_mass, expectation_energy,
    expectation_momentum, free_gaussian, init_packet, norm, propagate, render_potential, run_simulation,
    simulate_batch,
)

from conftest import SMALL


def test_grid_spacing_defaults():
    g = SimGrid()
    assert g.dx == pytest.approx(100 / 1024)
    assert g.dt == pytest.approx(0.1)
    assert g.x[-1] < g.L_x


def test_displacement_is_minimum_image():
    g = SimGrid()
    d = g.displacement(1.0)
    assert np.all(np.abs(d) <= g.L_x / 2)
    assert d[np.argmin(np.abs(g.x - 99.0))] == pytest.approx(-2.0, abs=g.dx)


@pytest.mark.parametrize("kw", [dict(S0=0), dict(S0=-1), dict(E0=-0.1), dict(modulation="sine")])
def test_packet_validation(kw):
    args = {"X0": 10.0, "S0": 1.0, "E0": 1.0, **kw}
    with pytest.raises(ValueError):
        GaussianPacketSpec(**args)


def test_packet_outside_box_rejected():
    with pytest.raises(ValueError, match="outside"):
        init_packet(SimGrid(), GaussianPacketSpec(100.0, 1, 1))


@pytest.mark.parametrize("mod", ["gaussian", "triangle", "square"])
def test_initial_packet_normalized(mod):
    g = SimGrid()
    psi = init_packet(g, GaussianPacketSpec(30.0, 2.0, 5.0, mod))
    assert norm(psi, g.dx) == pytest.approx(1.0, abs=1e-12)


def test_initial_momentum_and_energy():
    g = SimGrid()
    spec = GaussianPacketSpec(50.0, 2.0, 5.0)
    psi = init_packet(g, spec)
    # <p> = k0 and <E> = k0^2/2 + 1/(8 S0^2) for a Gaussian
    assert expectation_momentum(psi, g) == pytest.approx(np.sqrt(10), rel=1e-9)
    assert expectation_energy(psi, np.zeros(g.N_x), g) == pytest.approx(5 + 1 / 32, rel=1e-9)


def test_packet_smooth_across_seam():
    g = SimGrid()
    psi = init_packet(g, GaussianPacketSpec(0.5, 1.0, 0.0))
    # mirror symmetry about X0 survives the wrap
    i0 = int(round(0.5 / g.dx))
    assert abs(psi[(i0 - 5) % g.N_x]) == pytest.approx(abs(psi[i0 + 5]), rel=1e-2)


def test_rectangular_barrier_footprint():
    # half-open box [46.5, 53.5) on x_i = i * 100/1024:
    # first index ceil(46.5 * 10.24) = 477, last floor(53.5 * 10.24) = 547
    v = render_potential(SimGrid(), PotentialSpec.rectangular(14.0, 7.0))
    idx = np.flatnonzero(v)
    assert idx.size == 71
    assert (idx[0], idx[-1]) == (477, 547)
    assert v.max() == 14.0


def test_potential_shapes_render():
    g = SimGrid()
    assert render_potential(g, PotentialSpec("pyramid")).max() == pytest.approx(9.0)
    assert render_potential(g, PotentialSpec("half_circle")).max() == pytest.approx(8.0, rel=1e-3)
    assert render_potential(g, PotentialSpec("rectangular_well")).min() == -5.0
    q = render_potential(g, PotentialSpec("quadratic", {"curvature": 0.01}))
    assert q.min() == 0 and q.max() == pytest.approx(0.01 * 50**2)
    two = PotentialSpec("multi_rectangular", {"barriers": [{"height": 3.0, "width": 2.0, "center": 40.0},
                                                          {"height": 5.0, "width": 2.0, "center": 60.0}]})
    assert set(np.unique(render_potential(g, two))) == {0.0, 3.0, 5.0}


def test_potential_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown parameters"):
        PotentialSpec("rectangular", {"hieght": 3})
    with pytest.raises(ValueError, match="unknown potential shape"):
        PotentialSpec("trapezoid")


def test_piecewise_length_checked():
    with pytest.raises(ValueError, match="values"):
        render_potential(SMALL, PotentialSpec("piecewise_samples", {"values": [0.0] * 3}))


def test_free_gaussian_matches_closed_form():
    g = SimGrid(L_x=50.0, N_x=512, N_t=30)
    spec = GaussianPacketSpec(20.0, 2.0, 5.0)
    traj = run_simulation(spec, grid=g)
    for j in range(g.N_t):
        c = normalized_correlation(traj.psi[j], free_gaussian(g, spec, j * g.dt))
        assert c > 1 - 1e-9, j


def test_free_gaussian_at_zero_is_initial_packet():
    g = SimGrid()
    spec = GaussianPacketSpec(40.0, 1.5, 3.0)
    assert np.allclose(free_gaussian(g, spec, 0.0), init_packet(g, spec), atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(x0=st.floats(2, 23), s0=st.floats(0.5, 3), e0=st.floats(0, 9), h=st.floats(0, 20),
       method=st.sampled_from(["spectral", "tridiagonal"]))
def test_norm_conserved(x0, s0, e0, h, method):
    g = SMALL
    psi = init_packet(g, GaussianPacketSpec(x0, s0, e0))
    v = render_potential(g, PotentialSpec.rectangular(h, 3.0))
    out = propagate(psi, v, g, 400, method=method)
    assert norm(out, g.dx) == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize("method", ["spectral", "tridiagonal"])
def test_time_reversal(method):
    g = SMALL
    psi = init_packet(g, GaussianPacketSpec(8.0, 1.0, 4.0))
    v = render_potential(g, PotentialSpec.rectangular(6.0, 2.0, center=12.0))
    fwd = propagate(psi, v, g, 600, method=method)
    back = propagate(fwd, v, g, 600, method=method, dt=-g.dt_int)
    assert np.max(np.abs(back - psi)) < 1e-11


@pytest.mark.parametrize("method", ["spectral", "tridiagonal"])
def test_constant_potential_is_a_global_phase(method):
    g = SMALL
    psi = init_packet(g, GaussianPacketSpec(10.0, 1.5, 2.0))
    c, n = 3.7, 300
    a = propagate(psi, np.zeros(g.N_x), g, n, method=method)
    b = propagate(psi, np.full(g.N_x, c), g, n, method=method)
    assert np.allclose(b, a * np.exp(-1j * c * n * g.dt_int), atol=1e-12)


def test_ehrenfest_free_motion():
    g = SimGrid(N_t=40)
    spec = GaussianPacketSpec(30.0, 2.0, 5.0)
    traj = run_simulation(spec, grid=g)
    t = (g.N_t - 1) * g.dt
    assert center_of_mass(traj.psi[-1], g, spec.X0) == pytest.approx(spec.X0 + spec.k0 * t, abs=1e-6)
    assert expectation_momentum(traj.psi[-1], g) == pytest.approx(spec.k0, rel=1e-9)


def test_energy_conserved_with_barrier():
    g = SimGrid(N_t=60)
    traj = run_simulation(GaussianPacketSpec(35.0, 2.0, 5.0), PotentialSpec.rectangular(6.0, 4.0), grid=g)
    e = [expectation_energy(p, traj.v, g) for p in traj.psi[::10]]
    assert np.ptp(e) < 1e-3 * e[0]


def test_tridiagonal_matches_finite_difference_exponential():
    # oracle: dense expm of the 3-point periodic Hamiltonian
    g = SimGrid(L_x=12.5, N_x=64)
    n = g.N_x
    lap = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    lap[0, -1] = lap[-1, 0] = 1
    v = render_potential(g, PotentialSpec.rectangular(4.0, 2.0, center=8.0))
    ham = -0.5 * lap / g.dx**2 + np.diag(v)
    psi = init_packet(g, GaussianPacketSpec(4.0, 1.0, 2.0))
    t = 0.5
    exact = scipy.linalg.expm(-1j * t * ham) @ psi
    errs = []
    for steps in (250, 500, 1000):
        out = propagate(psi, v, g, steps, method="tridiagonal", dt=t / steps)
        errs.append(np.linalg.norm(out - exact) * np.sqrt(g.dx))
    assert errs[-1] < 1e-3
    # second order in the time step
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.1)


def test_tridiagonal_needs_even_grid():
    g = SimGrid(L_x=10, N_x=99)
    with pytest.raises(ValueError, match="even"):
        propagate(np.ones(99, complex), np.zeros(99), g, 1, method="tridiagonal")


def test_nan_input_raises():
    psi = init_packet(SMALL, GaussianPacketSpec(5.0, 1.0, 1.0))
    psi[3] = np.nan
    with pytest.raises(NumericalError):
        propagate(psi, np.zeros(SMALL.N_x), SMALL, 1)


def test_norm_drift_guard_trips():
    # a negative tolerance makes any drift fatal
    with pytest.raises(NumericalError, match="norm drift"):
        simulate_batch([(GaussianPacketSpec(5.0, 1.0, 1.0), PotentialSpec())], SMALL, check_norm=-1.0)


def test_batch_equals_single():
    cases = [(GaussianPacketSpec(5.0, 1.0, 2.0), PotentialSpec()),
             (GaussianPacketSpec(9.0, 2.0, 6.0), PotentialSpec.rectangular(5.0, 2.0))]
    batch = simulate_batch(cases, SMALL)
    for (p, pot), tr in zip(cases, batch):
        single = run_simulation(p, pot, SMALL)
        assert np.allclose(tr.psi, single.psi, atol=1e-13)


def test_trajectory_store_roundtrip(tmp_path):
    tr = run_simulation(GaussianPacketSpec(5.0, 1.0, 2.0), PotentialSpec.rectangular(3.0, 2.0), SMALL)
    tr.save(tmp_path / "t")
    names = sorted(p.name for p in (tmp_path / "t").iterdir())
    assert names == ["manifest.json", "potential.f32", "psi_im.f32", "psi_re.f32"]
    m = json.loads((tmp_path / "t" / "manifest.json").read_text())
    assert m["shape"] == [SMALL.N_t, SMALL.N_x]
    back = Trajectory.load(tmp_path / "t")
    assert back.packet == tr.packet and back.potential == tr.potential and back.grid == tr.grid
    assert np.allclose(back.psi, tr.psi, atol=1e-6)
    raw = np.fromfile(tmp_path / "t" / "psi_re.f32", dtype="<f4").reshape(SMALL.N_t, SMALL.N_x)
    assert np.array_equal(raw, tr.psi.real.astype(np.float32))


def test_potential_spec_dict_roundtrip():
    p = PotentialSpec("pyramid", {"n_steps": 4})
    assert PotentialSpec.from_dict(json.loads(json.dumps(p.to_dict()))) == p
