import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abvortex.deficiency_two import (
    CHANNELS,
    ChannelIndex,
    SeriesMethod,
    asymptotic_check,
    asymptotic_matrices,
    cal_S,
    cal_T,
    cut_jump_residual,
    deficiency_basis,
    helmholtz_residual,
    order_sign_difference,
    psi,
    s_term,
    singular_coefficient_matrix,
    verify_cut_conditions,
)
from abvortex.errors import AtVortex, InvalidParameter
from abvortex.geometry import PlanePoint, VortexPair
from abvortex.quadrature import g_vector
from abvortex.special import bessel_k, kappa

CFG = VortexPair(1 / 3, 2 / 3, 1.0)
Z = 1j


def sample_points(n, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform([-2.0, -1.5], [3.0, 1.5], (n, 2))


def test_channel_order():
    assert [(c.u, c.which) for c in CHANNELS] == [("a", -1), ("a", 0), ("b", -1), ("b", 0)]
    assert [c.flat for c in CHANNELS] == [1, 2, 3, 4]
    assert CHANNELS[0].nu(CFG) == pytest.approx(-2 / 3)
    assert CHANNELS[3].nu(CFG) == pytest.approx(2 / 3)
    with pytest.raises(InvalidParameter):
        ChannelIndex("c", 0)
    with pytest.raises(InvalidParameter):
        ChannelIndex.from_flat(5)


def test_example_series_against_resummed():
    x = PlanePoint(0.3, 0.2)
    assert abs(psi(1, Z, CFG, x, SeriesMethod(12)) - psi(1, Z, CFG, x)) < 1e-8


@pytest.mark.parametrize("ch", CHANNELS, ids=lambda c: f"{c.u}{c.which}")
def test_series_against_resummed(ch):
    pts = sample_points(20, ch.flat)
    diff = psi(ch, Z, CFG, pts, SeriesMethod(12)) - psi(ch, Z, CFG, pts)
    assert np.max(np.abs(diff)) < 1e-8


@pytest.mark.parametrize("ch", CHANNELS, ids=lambda c: f"{c.u}{c.which}")
def test_vanishes_at_other_vortex(ch):
    other = PlanePoint(1.0, 0.0) if ch.u == "a" else PlanePoint(0.0, 0.0)
    assert abs(psi(ch, Z, CFG, other)) < 1e-8
    assert abs(psi(ch, Z, CFG, other, SeriesMethod(12))) < 1e-8
    # odd terms cancel the preceding even ones there
    for m in (1, 2, 3):
        assert abs(s_term(2 * m - 1, ch, Z, CFG, other) + s_term(2 * m - 2, ch, Z, CFG, other)) < 1e-12


def test_singular_at_own_vortex():
    with pytest.raises(AtVortex):
        psi(1, Z, CFG, PlanePoint(0.0, 0.0))
    with pytest.raises(AtVortex):
        psi(3, Z, CFG, PlanePoint(1.0, 0.0))
    with pytest.raises(InvalidParameter):
        s_term(-1, 1, Z, CFG, PlanePoint(0.5, 0.5))


def test_channel_spellings():
    x = PlanePoint(0.3, 0.2)
    ref = psi(2, Z, CFG, x)
    assert psi(("a", 0), Z, CFG, x) == ref
    assert psi(("a", "upper"), Z, CFG, x) == ref
    assert psi(ChannelIndex("a", 0), Z, CFG, x) == ref
    with pytest.raises(InvalidParameter):
        psi(2, Z, CFG, x, method="guess")


@pytest.mark.parametrize("ch", CHANNELS, ids=lambda c: f"{c.u}{c.which}")
def test_cut_conditions(ch):
    assert verify_cut_conditions(ch, Z, CFG, samples=(0.3, 0.9, 2.0)) < 1e-6


def test_cut_condition_negative_control():
    k = kappa(Z)

    def free(x1, x2, side):
        return bessel_k(0.0, k * np.hypot(x1, x2))

    res = cut_jump_residual(free, "a", CFG.alpha, [0.3], CFG.rho)
    expected = 2 * np.sin(np.pi * CFG.alpha) * abs(bessel_k(0.0, 0.3 * k))
    assert res >= expected * (1 - 1e-9) and res > 0.1


@pytest.mark.parametrize("ch", CHANNELS, ids=lambda c: f"{c.u}{c.which}")
def test_helmholtz_second_order(ch):
    basis = deficiency_basis(Z, CFG)

    def f(pts):
        return basis.evaluate(ch, pts[:, 0], pts[:, 1], np.zeros(len(pts), dtype=int))

    x = (0.35, 0.6)
    res = [abs(helmholtz_residual(f, Z, x, h)) for h in (2e-2, 1e-2, 5e-3)]
    assert res[2] < res[1] < res[0]
    for coarse, fine in zip(res, res[1:]):
        assert 3.2 < coarse / fine < 4.8


def test_singular_coefficient_matrix_nonsingular():
    M = singular_coefficient_matrix(Z, CFG)
    s = np.linalg.svd(M, compute_uv=False)
    assert s.min() > 1e-6 * s.max()
    assert int(np.sum(s > 1e-8 * s.max())) == 4


def test_series_term_bounds():
    basis = deficiency_basis(Z, CFG)
    h = basis.grid.h
    q = np.exp(-kappa(Z).real * CFG.rho)
    x = PlanePoint(0.4, 0.7)
    for ch in CHANNELS:
        kern = basis.kern
        v = "b" if ch.u == "a" else "a"
        rv, tv = (np.hypot(x.x1 - 1, x.x2), np.arctan2(-x.x2, 1 - x.x1)) if v == "b" else \
            (np.hypot(x.x1, x.x2), np.arctan2(x.x2, x.x1))
        fv = kern.weighted(v, kern.columns(rv), tv)[:, 0]
        g = g_vector(basis.grid, ch.nu(CFG))
        norm = h * np.linalg.norm(fv) * np.linalg.norm(g)
        for n in (1, 2, 3, 4):
            assert abs(s_term(2 * n - 1, ch, Z, CFG, x)) <= norm * q ** (2 * n - 2) * (1 + 1e-9)


def test_geometric_tail():
    q = np.exp(-2 * kappa(Z).real * CFG.rho)
    x = PlanePoint(0.4, 0.7)
    for ch in CHANNELS:
        mags = [abs(s_term(n, ch, Z, CFG, x)) for n in range(1, 11)]
        for n in range(len(mags) - 2):
            assert mags[n + 2] <= q * mags[n] * 1.05


def test_large_separation_limit():
    cfg = VortexPair(1 / 3, 2 / 3, 10.0)
    basis = deficiency_basis(Z, cfg)
    h = basis.grid.h
    k = kappa(Z)
    q1 = np.exp(-k.real * cfg.rho)
    x = PlanePoint(0.3, 0.4)
    ra, ta = np.hypot(0.3, 0.4), np.arctan2(0.4, 0.3)
    rb, tb = np.hypot(9.7, 0.4), np.arctan2(-0.4, 9.7)
    fa = basis.kern.weighted("a", basis.kern.columns(ra), ta)[:, 0]
    fb = basis.kern.weighted("b", basis.kern.columns(rb), tb)[:, 0]
    for ch in CHANNELS[:2]:
        nu = ch.nu(cfg)
        g = g_vector(basis.grid, nu)
        bound = h * np.linalg.norm(g) * (np.linalg.norm(fb) + np.linalg.norm(fa) * q1) / (1 - q1 ** 2)
        lead = bessel_k(abs(nu), k * ra) * np.exp(1j * nu * ta)
        corr = abs(psi(ch, Z, cfg, x) - lead)
        assert corr <= bound * (1 + 1e-9)
        assert corr < 1e-3 * abs(lead)


def test_asymptotic_matrix_limits():
    cfg = VortexPair(1 / 3, 2 / 3, 12.0)
    m = asymptotic_matrices(Z, cfg)
    k = kappa(Z)
    lead = np.pi / (2 * np.sin(np.pi * cfg.alpha))
    assert np.allclose(m.T, lead * np.eye(2), atol=1e-4)
    for i, om in enumerate((cfg.beta - 1, cfg.beta)):
        for j, nu in enumerate((cfg.alpha - 1, cfg.alpha)):
            ratio = m.S[i, j] / bessel_k(om - nu, k * cfg.rho)
            assert abs(ratio - 1) < 1e-3


@settings(max_examples=10)
@given(st.floats(0.15, 0.85), st.floats(0.15, 0.85), st.sampled_from([1j, -1.0, 0.5 + 1j, -1 - 2j]))
def test_asymptotic_matrix_symmetries(alpha, beta, z):
    cfg = VortexPair(alpha, beta, 1.0)
    m = asymptotic_matrices(z, cfg)
    assert abs(m.T[0, 1] - m.T[1, 0]) < 1e-9
    swapped = asymptotic_matrices(z, cfg, own="b")
    assert np.max(np.abs(m.S - swapped.S.T)) < 1e-9
    assert abs(cal_T(-1, 0, alpha, beta, z) - m.T[0, 1]) == 0
    assert abs(cal_S(0, -1, alpha, beta, z) - m.S[1, 0]) == 0
    conj = asymptotic_matrices(np.conj(z), cfg)
    assert np.max(np.abs(np.conj(m.T) - conj.T)) < 1e-9
    assert np.max(np.abs(np.conj(m.S) - conj.S)) < 1e-9


@pytest.mark.parametrize("ch", CHANNELS, ids=lambda c: f"{c.u}{c.which}")
def test_asymptotic_coefficients(ch):
    rep = asymptotic_check(ch, Z, CFG)
    for key, err in rep.errors.items():
        tol = 1e-4 if "singular" in key else 1e-3
        assert err < tol, key
    j = ch.which + 1
    order = abs(ch.nu(CFG))
    from abvortex.special import gamma
    assert rep.fitted[f"own_singular[{j}]"] == pytest.approx(gamma(order) / 2, rel=1e-4)


@pytest.mark.xfail(strict=True, reason="the chain sums for orders nu and -nu differ; see the decision ledger")
def test_order_sign_identity():
    x = PlanePoint(0.3, 0.2)
    for ch in CHANNELS:
        assert abs(order_sign_difference(ch, Z, CFG, x, n_max=12)) < 1e-8


def test_order_sign_difference_methods_agree():
    x = PlanePoint(0.3, 0.2)
    for ch in CHANNELS:
        a = order_sign_difference(ch, Z, CFG, x, n_max=12)
        b = order_sign_difference(ch, Z, CFG, x)
        assert abs(a - b) < 1e-8
