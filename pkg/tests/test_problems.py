import numpy as np
import pytest

from rail.exceptions import ArgumentError
from rail.lowrank import LowRankState, mass
from rail.problems import (
    LBFP_MAXWELLIANS,
    RankOneFlow,
    explicit_flux_divergence,
    make_benchmark,
    make_diffusion_benchmark,
    make_lbfp_benchmark,
    make_rigid_rotation_benchmark,
    make_swirling_benchmark,
    maxwellian,
)

from conftest import random_state

NAMES = ["diffusion", "rigid", "rigid-rank", "swirling", "lbfp"]


def dense_flux(spec, u, t):
    f1, f2 = spec.flows
    a1 = f1.at(t) * np.outer(f1.ax, f1.ay)
    a2 = f2.at(t) * np.outer(f2.ax, f2.ay)
    return -(spec.diff_x.d1 @ (a1 * u) + (a2 * u) @ spec.diff_y.d1.T)


def constant_state(n):
    ones = np.ones((n, 1)) / np.sqrt(n)
    return LowRankState(ones, np.array([[float(n)]]), ones)


# -- diffusion -------------------------------------------------------------


def test_diffusion_initial_amplitude():
    spec = make_diffusion_benchmark(28)
    x = spec.grid.x.points
    i = int(np.argmin(np.abs(x - 6.5)))
    assert x[i] == 6.5
    expected = 0.8 + 0.5 * np.exp(-15 * 1.0) * np.exp(-15 * 0.25)
    assert np.isclose(spec.initial().to_dense()[i, i], expected, rtol=1e-13)


def test_diffusion_rank_and_defaults():
    spec = make_diffusion_benchmark(64)
    assert spec.initial().rank == 2
    padded = spec.initial_state()
    assert padded.rank == 20
    assert np.allclose(padded.to_dense(), spec.initial().to_dense(), atol=1e-14)
    d = spec.defaults
    assert (d["n"], d["eps"], d["t_final"], d["r0"]) == (200, 1e-8, 0.5, 20)
    assert (spec.d1, spec.d2) == (0.25, 1.0 / 9.0)
    assert not spec.has_advection and spec.conserves_mass


# -- rigid rotation ---------------------------------------------------------


def test_rigid_exact_and_source_at_origin():
    spec = make_rigid_rotation_benchmark(32)
    x = spec.grid.x.points
    i = int(np.argmin(np.abs(x)))
    assert abs(x[i]) < 1e-14
    assert spec.exact(0.0)[i, i] == 1.0
    assert np.isclose(spec.source(0.0).to_dense()[i, i], 1.2, rtol=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.7])
def test_rigid_source_dense_samples(t):
    spec = make_rigid_rotation_benchmark(40)
    d = 0.2
    xx, yy = spec.grid.mesh()
    phi = (6 * d - 4 * xx * yy - 4 * d * (xx**2 + 9 * yy**2)) * np.exp(-(xx**2 + 3 * yy**2 + 2 * d * t))
    assert np.abs(spec.source(t).to_dense() - phi).max() <= 1e-12
    assert spec.source(t).c.shape[0] <= 4


def test_rigid_modes():
    rank = make_rigid_rotation_benchmark(32, "rank")
    assert rank.source is None and rank.exact is None
    xx, yy = rank.grid.mesh()
    assert np.allclose(rank.initial().to_dense(), np.exp(-(xx**2 + 9 * yy**2)), atol=1e-15)
    assert np.isclose(rank.defaults["t_final"], np.pi / 2)
    with pytest.raises(ArgumentError):
        make_rigid_rotation_benchmark(16, "spin")


# -- swirling deformation ---------------------------------------------------


def test_swirl_flow_scale_and_bell():
    spec = make_swirling_benchmark(64, t_final=0.5)
    assert abs(spec.flow_scale(0.25)) < 1e-15
    assert np.isclose(spec.flow_scale(0.0), np.pi)
    assert spec.bell(0.3 * np.pi, 0.0) == 0.3 * np.pi
    assert spec.bell(0.3 * np.pi + 1.0, 0.0) == 0.0
    assert spec.defaults["r0"] == 15 and spec.defaults["n"] == 100


def test_swirl_initial_compression():
    spec = make_swirling_benchmark(48)
    xx, yy = spec.grid.mesh()
    u = spec.initial()
    assert np.abs(u.to_dense() - spec.bell(xx, yy)).max() < 1e-11
    assert u.singular_values().min() > 1e-12


def test_swirl_flux_dense_oracle(rng):
    spec = make_swirling_benchmark(40)
    for t in (0.0, 0.1, 0.4):
        u = random_state(rng, 40, 3)
        got = explicit_flux_divergence(u, spec.flows, spec.diff_x, spec.diff_y, t)
        assert got.c.shape == (6, 6)
        expected = dense_flux(spec, u.to_dense(), t)
        assert np.abs(got.to_dense() - expected).max() <= 1e-11 * max(1.0, np.abs(expected).max())


# -- flux structure ---------------------------------------------------------


def test_constant_flow_annihilates_constants():
    spec = make_diffusion_benchmark(16)
    ones = np.ones(16)
    flows = (RankOneFlow(2.5 * ones, ones), RankOneFlow(0 * ones, ones))
    out = explicit_flux_divergence(constant_state(16), flows, spec.diff_x, spec.diff_y, 0.0)
    assert np.abs(out.to_dense()).max() < 1e-12


def test_rotation_annihilates_constants():
    spec = make_rigid_rotation_benchmark(24)
    out = explicit_flux_divergence(constant_state(24), spec.flows, spec.diff_x, spec.diff_y, 0.0)
    assert np.abs(out.to_dense()).max() < 1e-11


@pytest.mark.parametrize("name", ["rigid", "swirling"])
def test_divergence_free_flux_has_zero_mass(rng, name):
    spec = make_benchmark(name, n=32)
    for t in (0.0, 0.2):
        u = random_state(rng, 32, 4)
        flux = explicit_flux_divergence(u, spec.flows, spec.diff_x, spec.diff_y, t)
        assert abs(mass(flux, spec.grid)) <= 1e-11 * u.norm()


# -- LBFP -------------------------------------------------------------------


def test_lbfp_parameters():
    m1, m2 = LBFP_MAXWELLIANS
    assert (m1["n"], m1["ux"], m1["temp"]) == (1.990964530353041, 0.4979792385268875, 2.46518981703837)
    assert (m2["n"], m2["ux"], m2["temp"]) == (1.150628123236752, -0.8616676237412346, 0.4107062104302872)
    spec = make_lbfp_benchmark(64)
    assert spec.d1 == spec.d2 == 0.5
    assert spec.initial().rank == 2


@pytest.mark.parametrize("n", [64, 128])
def test_lbfp_mass_is_pi(n):
    spec = make_lbfp_benchmark(n)
    assert abs(mass(spec.initial(), spec.grid) - np.pi) <= 1e-10
    eq = spec.equilibrium()
    assert abs(spec.grid.cell_area * eq.sum() - np.pi) <= 1e-10


def test_lbfp_initial_matches_maxwellians():
    spec = make_lbfp_benchmark(48)
    v = spec.grid.x.points
    dense = sum(maxwellian(v, v, **m) for m in LBFP_MAXWELLIANS)
    assert np.abs(spec.initial().to_dense() - dense).max() < 1e-14


def test_lbfp_equilibrium_residual():
    spec = make_lbfp_benchmark(128)
    f = spec.equilibrium()
    implicit = spec.d1 * spec.diff_x.d2 @ f + spec.d2 * f @ spec.diff_y.d2.T
    residual = implicit + dense_flux(spec, f, 0.0)
    assert np.abs(residual).max() <= 1e-8


def test_lbfp_weight():
    spec = make_lbfp_benchmark(32, delta=1e-6)
    w = spec.weight_function()
    v = spec.grid.x.points
    assert np.allclose(w.w1, np.exp(-(v**2) / 2) + 1e-6)
    assert np.allclose(spec.weight_function("uniform").w1, 1.0)
    assert np.allclose(spec.weight_function("maxwellian", 1e-3).w2, np.exp(-(v**2) / 2) + 1e-3)


# -- shared -----------------------------------------------------------------


@pytest.mark.parametrize("name", NAMES)
def test_initial_states_orthonormal(name):
    spec = make_benchmark(name, n=32)
    u = spec.initial_state(8)
    for v in (u.vx, u.vy):
        assert np.abs(v.T @ v - np.eye(v.shape[1])).max() < 1e-12
    ops = spec.operators()
    assert ops.fx.shape == (32, 32)
    assert (ops.explicit_term is not None) == spec.has_advection


def test_unknown_problem():
    with pytest.raises(ArgumentError, match="unknown problem"):
        make_benchmark("burgers")
