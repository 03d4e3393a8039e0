"""Folding between half-line block problems and whole-line problems."""

import types

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as strat

import oracles
from halfline import boundary, evolve, jost, linemap, potential, spectral
from halfline.errors import HermiticityError
from halfline.potential import KGrid, XGrid


def _smooth_window(x, lo, hi):
    """C-infinity step vanishing identically below lo and one above hi."""
    y = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(y > 0, np.exp(-1.0 / np.maximum(y, 1e-300)), 0.0)
        b = np.where(y < 1, np.exp(-1.0 / np.maximum(1.0 - y, 1e-300)), 0.0)
    return a / (a + b)


def _one_sided_packet(x, amp=0.05, x0=6.0, width=2.0, carrier=1.3):
    """Packet supported strictly inside x > 0.5, so every boundary and
    transmission condition is met identically by vanishing."""
    return amp * np.exp(-(((x - x0) / width) ** 2)) * np.sin(carrier * x) * _smooth_window(
        x, 0.5, 2.0
    )


def _transform(v, kg, pair):
    jt = jost.solve_m(v, kg)
    sd = jost.scattering_matrix(jt, pair)
    return jt, sd, spectral.build_transform(jt, sd, pair, v)


def test_signed_points_duplicates_origin():
    xg = XGrid(0.0, 0.5, 5)
    pts = linemap.signed_points(xg)
    assert pts.size == 10
    assert pts[4] == 0.0 and pts[5] == 0.0
    assert np.allclose(pts, -pts[::-1], atol=0.0)


def test_delta_boundary_blocks():
    lam = np.array([[2.0, 1j], [-1j, 0.5]])
    pair = linemap.delta_boundary(2, lam)
    eye = np.eye(2)
    zero = np.zeros((2, 2))
    assert np.allclose(pair.a, np.block([[zero, eye], [zero, eye]]), atol=0.0)
    assert np.allclose(pair.b, np.block([[-eye, lam], [eye, zero]]), atol=0.0)
    # construction went through validate, so admissibility already held
    assert boundary.validate(pair.a, pair.b).dim == 4


def test_delta_boundary_rejects_non_hermitian():
    with pytest.raises(HermiticityError):
        linemap.delta_boundary(2, np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_delta_boundary_shape_errors():
    with pytest.raises(ValueError, match="shape"):
        linemap.delta_boundary(2, np.array([[1.0]]))
    with pytest.raises(ValueError, match="positive"):
        linemap.delta_boundary(0, np.zeros((0, 0)))


def test_line_problem_even_q_gives_equal_blocks():
    xg = XGrid(0.0, 0.1, 51)
    lp = linemap.line_problem(xg, lambda x: 0.3 * np.exp(-x * x))
    spec, pair, nl = linemap.to_halfline(lp)
    assert pair.dim == 2
    assert nl.vanishes
    assert np.max(np.abs(spec.samples[:, 0, 0] - spec.samples[:, 1, 1])) == 0.0


def test_line_problem_odd_part_separates_blocks():
    xg = XGrid(0.0, 0.1, 51)
    lp = linemap.line_problem(xg, lambda x: 0.3 * np.exp(-x * x) + 0.05 * x * np.exp(-abs(x)))
    spec, _, _ = linemap.to_halfline(lp)
    assert np.max(np.abs(spec.samples[:, 0, 0] - spec.samples[:, 1, 1])) > 1e-3


def test_line_problem_zero_q_maps_to_zero_potential():
    xg = XGrid(0.0, 0.1, 41)
    lp = linemap.line_problem(xg, lambda x: np.zeros((2, 2)))
    spec, pair, _ = linemap.to_halfline(lp)
    assert pair.dim == 4
    assert np.max(np.abs(spec.samples)) == 0.0


def test_line_problem_rejects_non_hermitian_q():
    xg = XGrid(0.0, 0.1, 11)
    with pytest.raises(HermiticityError):
        linemap.line_problem(xg, lambda x: np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_line_problem_sample_count_mismatch():
    xg = XGrid(0.0, 0.1, 11)
    with pytest.raises(ValueError, match="expected"):
        linemap.line_problem(xg, np.zeros((5, 1, 1)))


def test_line_problem_accepts_block_tuple():
    xg = XGrid(0.0, 0.1, 21)
    lam = np.array([[1.5]])
    ref = linemap.delta_boundary(1, lam)
    n = 1
    lp = linemap.line_problem(
        xg,
        lambda x: 0.1 * np.exp(-x * x),
        blocks=(ref.a[:n], ref.a[n:], ref.b[:n], ref.b[n:]),
    )
    _, pair, _ = linemap.to_halfline(lp)
    assert boundary.equivalent(pair, ref)


def test_line_problem_rejects_wrong_pair_dim():
    xg = XGrid(0.0, 0.1, 21)
    with pytest.raises(ValueError, match="dim"):
        linemap.line_problem(
            xg, lambda x: np.zeros((2, 2)), blocks=linemap.delta_boundary(1, np.zeros((1, 1)))
        )


@settings(max_examples=25, deadline=None)
@given(
    count=strat.integers(min_value=2, max_value=30),
    n=strat.integers(min_value=1, max_value=3),
    seed=strat.integers(min_value=0, max_value=2**31 - 1),
)
def test_fold_unfold_roundtrip(count, n, seed):
    rng = np.random.default_rng(seed)
    half = rng.normal(size=(count, 2 * n)) + 1j * rng.normal(size=(count, 2 * n))
    line = linemap.unfold(half)
    assert line.shape == (2 * count, n)
    assert np.array_equal(linemap.fold(line), half)


def test_unfold_preserves_l2_norm():
    xg = XGrid(0.0, 0.05, 401)
    rng = np.random.default_rng(11)
    half = rng.normal(size=(401, 2)) + 1j * rng.normal(size=(401, 2))
    line = linemap.unfold(half)
    spts = linemap.signed_points(xg)
    line_sq = float(np.trapezoid(np.sum(np.abs(line) ** 2, axis=1), spts))
    w = np.full(401, xg.step)
    w[0] = w[-1] = xg.step / 2
    half_sq = float(np.sum(w * np.sum(np.abs(half) ** 2, axis=1)))
    assert abs(line_sq - half_sq) < 1e-12 * half_sq


def test_odd_line_function_folds_to_antisymmetric_channels():
    xg = XGrid(0.0, 0.1, 101)
    spts = linemap.signed_points(xg)
    line = (spts * np.exp(-(spts**2)))[:, None].astype(complex)
    half = linemap.fold(line)
    assert np.array_equal(half[:, 1], -half[:, 0])


def test_fold_shape_validation():
    with pytest.raises(ValueError, match="2n"):
        linemap.unfold(np.zeros((4, 3)))
    with pytest.raises(ValueError, match="2\\*count"):
        linemap.fold(np.zeros((5, 1)))


class TestNonlinearityAssembly:
    def test_both_none_vanishes(self):
        xg = XGrid(0.0, 0.1, 11)
        lp = linemap.line_problem(xg, lambda x: 0.0 * x)
        _, _, nl = linemap.to_halfline(lp)
        assert nl.vanishes

    def test_matching_diagonal_sides_stay_pointwise(self):
        xg = XGrid(0.0, 0.1, 11)
        side = evolve.diagonal_power(3.0, 0.7)
        lp = linemap.line_problem(xg, lambda x: 0.0 * x, nl_plus=side, nl_minus=side)
        _, _, nl = linemap.to_halfline(lp)
        assert nl.form == "diagonal_power"
        assert nl.alpha == 3.0 and nl.lam == 0.7

    def test_scalar_sides_assemble_block_diagonal(self):
        xg = XGrid(0.0, 0.1, 11)
        plus = evolve.scalar_power(3.0, 1.0)
        minus = evolve.scalar_power(3.0, 0.5)
        lp = linemap.line_problem(
            xg, lambda x: np.zeros((2, 2)), nl_plus=plus, nl_minus=minus
        )
        _, _, nl = linemap.to_halfline(lp)
        mu = np.array([0.3, 0.4, 0.1, 0.2])
        got = nl.matrix(mu)
        want = np.zeros((4, 4), dtype=complex)
        want[:2, :2] = plus.matrix(mu[:2])
        want[2:, 2:] = minus.matrix(mu[2:])
        assert np.allclose(got, want, atol=1e-15)

    def test_one_sided_nonlinearity(self):
        xg = XGrid(0.0, 0.1, 11)
        lp = linemap.line_problem(
            xg, lambda x: 0.0 * x, nl_plus=evolve.scalar_power(3.0, 1.0)
        )
        _, _, nl = linemap.to_halfline(lp)
        got = nl.matrix(np.array([0.5, 0.5]))
        assert abs(got[0, 0] - 0.125) < 1e-15
        assert abs(got[1, 1]) == 0.0

    def test_mismatched_alpha_rejected(self):
        xg = XGrid(0.0, 0.1, 11)
        with pytest.raises(ValueError, match="one alpha"):
            lp = linemap.line_problem(
                xg,
                lambda x: 0.0 * x,
                nl_plus=evolve.scalar_power(3.0, 1.0),
                nl_minus=evolve.scalar_power(4.0, 1.0),
            )
            linemap.to_halfline(lp)


class TestDeltaScattering:
    kg = KGrid(1e-3, 2e-3, 751)

    def test_zero_strength_is_transparent(self):
        rep = linemap.verify_line_scattering(0.0, self.kg)
        assert np.max(np.abs(rep["t_left"] - 1.0)) < 1e-12
        assert np.max(np.abs(rep["r_left"])) < 1e-12

    @pytest.mark.parametrize("lam", [2.0, -1.5])
    def test_matches_closed_form(self, lam):
        rep = linemap.verify_line_scattering(lam, self.kg)
        assert rep["max_t_error"] < 1e-10
        assert rep["max_r_error"] < 1e-10
        assert rep["max_unitarity_defect"] < 1e-8

    def test_matches_matching_system_oracle(self):
        lam = 2.0
        rep = linemap.verify_line_scattering(lam, self.kg)
        idx = np.array([3, 100, 500])
        r_o, t_o = oracles.delta_matching_coefficients(lam, rep["k"][idx])
        assert np.max(np.abs(rep["t_left"][idx] - t_o)) < 1e-10
        assert np.max(np.abs(rep["r_left"][idx] - r_o)) < 1e-10


@pytest.fixture(scope="module")
def jump_system():
    """Folded delta system, Lambda = 2, on a grid fine enough that the
    one-sided difference stencils resolve the derivative jump to 1e-5."""
    lam = 2.0
    xg = XGrid(0.0, 0.02, 1501)
    kg = KGrid(5e-4, 1e-3, 2001)
    lp = linemap.line_problem(
        xg,
        lambda x: 0.2 * np.exp(-x * x),
        blocks=linemap.delta_boundary(1, np.array([[lam]])),
    )
    spec, pair, _ = linemap.to_halfline(lp)
    jt, sd, st = _transform(spec, kg, pair)
    return types.SimpleNamespace(lam=lam, xg=xg, pair=pair, st=st)


def test_jump_condition_on_evolved_states(jump_system):
    js = jump_system
    x = js.xg.points
    phi0 = _one_sided_packet(x, x0=7.5, carrier=1.1)
    psi0 = np.stack([phi0, 0.3 * phi0], axis=1).astype(complex)
    u0 = evolve.make_state(0.0, psi0, js.xg, js.pair)
    traj = evolve.evolve_nls(
        js.st, evolve.scalar_power(3.0, 0.0), u0, 3.0, dt=0.1, pair=js.pair, sample_every=1.0
    )
    h = js.xg.step
    nx = js.xg.count
    for state in traj.samples[1:]:
        lv = linemap.unfold(state.values)
        # second-order one-sided stencils at the duplicated origin
        dp = (-3 * lv[nx, 0] + 4 * lv[nx + 1, 0] - lv[nx + 2, 0]) / (2 * h)
        dm = (3 * lv[nx - 1, 0] - 4 * lv[nx - 2, 0] + lv[nx - 3, 0]) / (2 * h)
        assert abs(lv[nx, 0] - lv[nx - 1, 0]) < 1e-12
        assert abs(dp - dm - js.lam * lv[nx, 0]) < 1e-5
        assert abs(lv[nx, 0]) > 1e-3  # the condition is exercised, not vacuous


@pytest.fixture(scope="module")
def fold_system():
    """Interaction-free line systems: dressed 2x2, free 2x2, and the scalar
    reductions on the matching half-line grids."""
    xg = XGrid(0.0, 0.05, 1201)
    kg = KGrid(1e-3, 2e-3, 1301)
    qfun = lambda x: 0.2 * np.exp(-x * x)
    side = evolve.diagonal_power(3.0, 1.0)
    lp = linemap.line_problem(xg, qfun, nl_plus=side, nl_minus=side)
    vspec, pair, nl2n = linemap.to_halfline(lp)
    _, _, st2 = _transform(vspec, kg, pair)
    lp_free = linemap.line_problem(xg, lambda x: 0.0 * x)
    vfree, pair_free, _ = linemap.to_halfline(lp_free)
    _, _, st2_free = _transform(vfree, kg, pair_free)
    v_scal = potential.gaussian(0.2, 1.0, np.array([[1.0]]), xg)
    pd = boundary.from_angles([np.pi])
    pn = boundary.from_angles([np.pi / 2])
    _, _, st_d = _transform(v_scal, kg, pd)
    _, _, st_n = _transform(v_scal, kg, pn)
    return types.SimpleNamespace(
        xg=xg,
        kg=kg,
        pair=pair,
        pair_free=pair_free,
        nl=nl2n,
        st2=st2,
        st2_free=st2_free,
        pd=pd,
        pn=pn,
        st_d=st_d,
        st_n=st_n,
    )


def _line_l2(xg, values):
    spts = linemap.signed_points(xg)
    return float(np.sqrt(np.trapezoid(np.sum(np.abs(values) ** 2, axis=1), spts)))


@pytest.mark.parametrize("parity", [-1.0, 1.0])
def test_evolution_commutes_with_folding(fold_system, parity):
    """Folded 2n dynamics equals the scalar even/odd reduction dynamics."""
    fs = fold_system
    x = fs.xg.points
    g = _one_sided_packet(x)
    psi = np.stack([g, parity * g], axis=1).astype(complex)
    u2 = evolve.make_state(0.0, psi, fs.xg, fs.pair)
    traj2 = evolve.evolve_nls(fs.st2, fs.nl, u2, 2.0, dt=0.05, pair=fs.pair, sample_every=2.0)
    scal_pair = fs.pd if parity < 0 else fs.pn
    scal_st = fs.st_d if parity < 0 else fs.st_n
    us = evolve.make_state(0.0, g[:, None].astype(complex), fs.xg, scal_pair)
    trajs = evolve.evolve_nls(
        scal_st, evolve.scalar_power(3.0, 1.0), us, 2.0, dt=0.05, pair=scal_pair, sample_every=2.0
    )
    line_folded = linemap.unfold(traj2.samples[-1].values)
    half = trajs.samples[-1].values[:, 0]
    line_direct = np.concatenate([parity * half[::-1], half])[:, None]
    assert _line_l2(fs.xg, line_folded - line_direct) < 1e-4


def test_free_line_dynamics_matches_fourier_oracle(fold_system):
    """One-sided data crossing the trivial junction follows the line flow."""
    fs = fold_system
    x = fs.xg.points
    g = _one_sided_packet(x, x0=7.5, width=3.0, carrier=0.8)
    psi = np.stack([g, np.zeros_like(g)], axis=1).astype(complex)
    # the evolution carries only the in-band content of psi; start the
    # oracle from that same profile or the ~1e-4 band dust dominates
    inband = fs.st2_free.apply_adjoint(fs.st2_free.apply_forward(psi))
    u0 = evolve.make_state(0.0, psi, fs.xg, fs.pair_free)
    traj = evolve.evolve_nls(
        fs.st2_free,
        evolve.scalar_power(3.0, 0.0),
        u0,
        2.0,
        dt=0.1,
        pair=fs.pair_free,
        sample_every=2.0,
    )
    line = linemap.unfold(traj.samples[-1].values)
    nx = fs.xg.count
    # drop the duplicated 0- row for the uniform-grid oracle
    keep = np.concatenate([np.arange(nx - 1), np.arange(nx, 2 * nx)])
    uniform_x = linemap.signed_points(fs.xg)[keep]
    line0 = linemap.unfold(inband)[keep, 0]
    oracle = oracles.fourier_line_evolution(line0, uniform_x, 2.0)
    diff = np.sqrt(np.trapezoid(np.abs(line[keep, 0] - oracle) ** 2, uniform_x))
    assert diff < 1e-5


@pytest.mark.parametrize(
    "tag,coupling,expected",
    [("free", 0.0, "exceptional"), ("bump", 0.3, "generic")],
)
def test_classification_matches_line_zero_energy(tag, coupling, expected):
    xg = XGrid(0.0, 0.05, 601)
    lp = linemap.line_problem(xg, lambda x: coupling * np.exp(-x * x))
    vspec, pair, _ = linemap.to_halfline(lp)
    jt = jost.solve_m(vspec, KGrid(1e-3, 2e-3, 501))
    sd = jost.scattering_matrix(jt, pair)
    assert sd.classification == expected
    bounded = oracles.line_zero_energy_bounded(
        lambda s: coupling * np.exp(-s * s), 20.0, 4000
    )
    assert bounded == (expected == "exceptional")
