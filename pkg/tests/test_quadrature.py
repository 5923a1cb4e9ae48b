import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abvortex.errors import GridBudgetExceeded, IncompatibleGrid, InvalidParameter
from abvortex.quadrature import (
    bessel_convolution_integral,
    bessel_product_integral,
    build_tau_grid,
    build_tau_grid_cached,
    chain_operators,
    discretize,
    flux_weight,
    g_vector,
    integrate_line,
    kernel_vectors,
    plane_integral,
)
from abvortex.geometry import PlanePoint, VortexPair
from abvortex.special import bessel_k, bessel_k_table, kappa


@pytest.fixture(scope="module")
def grid_i():
    return build_tau_grid(1j, 1.0, 1e-10, sigmas=(1 / 3, 2 / 3))


def fourier_closed_form(w, theta, alpha):
    """Residue evaluation of int exp(i tau w + theta tau) / sin(pi(alpha + i tau)) d tau."""
    return 2 * np.exp(alpha * (-w + 1j * theta)) / (1 + np.exp(-w + 1j * theta))


def test_gaussian():
    v, err = integrate_line(lambda s: np.exp(-s * s), "real", 1e-13)
    assert abs(v - np.sqrt(np.pi)) < 1e-12


def test_half_line_and_interval():
    assert abs(integrate_line(lambda s: np.exp(-s), "half")[0] - 1) < 1e-12
    assert abs(integrate_line(lambda s: s * s, (-1.0, 2.0))[0] - 3) < 1e-12
    with pytest.raises(InvalidParameter):
        integrate_line(lambda s: s, "circle")


def test_bessel_product_identity():
    got = bessel_product_integral(1.0, 1.0)
    assert abs(got - np.pi * bessel_k(0, 2.0)) < 1e-10


@pytest.mark.parametrize("w", [0.7, -0.7, 0.0, 2.5])
def test_fourier_identity(w):
    alpha, theta = 1 / 3, 0.4

    def f(t):
        # exp(theta t)/sin(pi(alpha + i t)) via the overflow-free weight
        return np.exp(1j * t * w) * flux_weight(alpha, t, theta) * np.pi / np.sin(np.pi * alpha)

    v = integrate_line(f, "real", 1e-11)[0]
    assert abs(v - fourier_closed_form(w, theta, alpha)) < 1e-9


def test_fourier_identity_stated_example():
    # the worked value 2 e^{-alpha(-0.7 - i theta)}/(1 + e^{0.7 + i theta}) is the w = -0.7 case
    alpha, theta = 1 / 3, 0.4
    stated = 2 * np.exp(-alpha * (-0.7 - 1j * theta)) / (1 + np.exp(0.7 + 1j * theta))
    f = lambda t: np.exp(-0.7j * t) * flux_weight(alpha, t, theta) * np.pi / np.sin(np.pi * alpha)
    assert abs(integrate_line(f, "real", 1e-11)[0] - stated) < 1e-9


def test_grid_half_width(grid_i):
    assert grid_i.half_width >= 30
    k = kappa(1j)
    tail = np.abs(bessel_k_table(1j * np.linspace(grid_i.half_width, 60, 50), [k]))
    assert tail.max() < 1e-12


def test_grid_symmetric(grid_i):
    nodes = grid_i.nodes
    assert np.allclose(nodes, -nodes[::-1], atol=1e-13)
    assert nodes[grid_i.zero_index] == 0.0
    assert grid_i.weights.sum() == pytest.approx(2 * grid_i.half_width)


def test_grid_rejects_zero_separation():
    with pytest.raises(InvalidParameter):
        build_tau_grid(1j, 0.0, 1e-10)


def test_grid_budget():
    with pytest.raises(GridBudgetExceeded):
        build_tau_grid(1j, 1.0, 1e-10, sigmas=(0.001,))


def test_grid_cache_returns_same_object():
    g1 = build_tau_grid_cached(1j, 1.0, 1e-10, (1 / 3,))
    g2 = build_tau_grid_cached(1j, 1.0, 1e-10, (1 / 3,))
    assert g1 is g2


def test_diagonal_entry_at_zero(grid_i):
    D = discretize("D", {"sigma": 1 / 3}, grid_i)
    assert D.data[grid_i.zero_index] == pytest.approx(1 / np.pi, rel=1e-14)
    assert np.max(np.abs(D.data)) <= 1 / np.pi * (1 + 1e-14)
    assert np.all(np.isfinite(D.data))


@given(st.floats(0.01, 0.99), st.floats(-40, 40), st.floats(-np.pi, np.pi))
def test_flux_weight_matches_direct_formula(sigma, tau, theta):
    direct = (np.sin(np.pi * sigma) * np.exp(theta * tau)
              / (np.pi * np.sin(np.pi * (sigma + 1j * tau))))
    got = flux_weight(sigma, tau, theta)
    assert abs(got - direct) <= 1e-12 * abs(direct) + 1e-300


def test_flux_weight_degenerate():
    assert np.all(flux_weight(0.0, np.linspace(-3, 3, 7)) == 0)


def test_kernel_matrix_entries(grid_i):
    K = discretize("K", {"z": 1j, "rho": 1.0}, grid_i).matrix
    k = kappa(1j)
    i, j = 10, 17
    tau = grid_i.nodes
    assert K[i, j] == pytest.approx(grid_i.h * bessel_k(1j * (tau[j] - tau[i]), k), rel=1e-13)


def test_kernel_incompatible(grid_i):
    with pytest.raises(IncompatibleGrid):
        discretize("K", {"z": 2j, "rho": 1.0}, grid_i)
    with pytest.raises(IncompatibleGrid):
        kernel_vectors("a", 0.3, 2j, PlanePoint(0.5, 0.5), grid_i, VortexPair(1 / 3, 2 / 3))


def test_kernel_norm_bound(grid_i):
    K = discretize("K", {}, grid_i).matrix
    bound = np.pi * np.exp(-kappa(1j).real)
    assert np.linalg.norm(K, 2) <= bound * (1 + 1e-10)


def test_kernel_symbol_norm(grid_i):
    # operator norm on the full lattice equals the sup of its symbol, attained at frequency 0
    k = kappa(1j)
    h = grid_i.h
    col = bessel_k_table(1j * h * np.arange(-(grid_i.n - 1), grid_i.n), [k])[:, 0]
    freqs = np.linspace(-1.0, 1.0, 21)
    symbol = np.abs(h * np.exp(1j * np.outer(freqs, h * np.arange(-(grid_i.n - 1), grid_i.n))) @ col)
    bound = np.pi * np.exp(-k.real)
    assert symbol.max() == pytest.approx(bound, rel=1e-6)
    assert np.argmax(symbol) == 10


def test_finite_section_norm_approaches_symbol():
    bound = np.pi * np.exp(-kappa(1j).real)
    gaps = []
    for T in (10.0, 20.0, 40.0):
        g = build_tau_grid(1j, 1.0, 1e-10, step=0.2, half_width=T)
        gaps.append(bound - np.linalg.norm(discretize("K", {}, g).matrix, 2))
    assert 0 < gaps[2] < gaps[1] < gaps[0]


def test_convolution_identity_on_grid(grid_i):
    K = discretize("K", {}, grid_i).matrix
    nu = 0.3
    ref = np.pi * bessel_k(-1j * grid_i.nodes - nu, 2 * kappa(1j))
    mid = np.abs(grid_i.nodes) < 10
    assert np.max(np.abs((K @ g_vector(grid_i, nu) - ref)[mid])) < 1e-10


def test_refinement_convergence():
    k = kappa(1j)
    res = []
    for h in (4.0, 2.0, 1.0):
        g = build_tau_grid(1j, 1.0, 1e-10, step=h)
        K = discretize("K", {}, g).matrix
        j0 = g.zero_index
        res.append(abs((K @ g_vector(g, 0.3))[j0] - np.pi * bessel_k(-0.3, 2 * k)))
    assert res[1] <= 0.5 * res[0]
    assert res[2] <= 0.5 * res[1]


def test_chain_operator_norm_bound(grid_i):
    ops = chain_operators(grid_i, 1 / 3, 2 / 3)
    M = (ops.K * ops.du) @ (ops.K * ops.dv)
    q = np.exp(-2 * kappa(1j).real)
    assert np.linalg.norm(M, 2) <= q * (1 + 1e-10)
    inv = np.linalg.inv(np.eye(grid_i.n) - M)
    assert np.linalg.norm(inv, 2) <= (1 + 1e-10) / (1 - q)
    v = np.random.default_rng(0).standard_normal(grid_i.n) + 0j
    assert np.allclose(ops.step(v), M @ v, atol=1e-14)


def test_kernel_vectors_finite(grid_i):
    kv = kernel_vectors("b", -1 / 3, 1j, PlanePoint(0.4, -0.2), grid_i, VortexPair(1 / 3, 2 / 3))
    assert np.all(np.isfinite(kv.f_vec)) and np.all(np.isfinite(kv.g_vec))


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (1.0, 2.0), (3.0, 1.0)])
def test_bessel_product_pairs(a, b):
    ref = np.pi * bessel_k(0, a + b)
    assert abs(bessel_product_integral(a, b) - ref) < 1e-8 * abs(ref)


def test_bessel_convolution_complex_argument():
    a, b, nu = 0.8 - 0.3j, 1.1 - 0.3j, 0.7
    ref = np.pi * bessel_k(1j * nu, a + b)
    assert abs(bessel_convolution_integral(a, b, nu) - ref) < 1e-8 * abs(ref)


def test_plane_integral_point_singularities():
    def f(y1, y2):
        ra = np.hypot(y1, y2)
        rb = np.hypot(y1 - 1, y2)
        return np.exp(-ra ** 2) / ra + np.exp(-rb ** 2) / rb

    got = plane_integral(f, [(0, 0), (1, 0)], 9.0)
    assert abs(got - 2 * np.pi ** 1.5) < 1e-7
