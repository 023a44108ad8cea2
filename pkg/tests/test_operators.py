import numpy as np
import pytest

from pctrecon.geometry import ScanGeometry, uniform_angles
from pctrecon.operators import (
    LinearOperator,
    acd_operator,
    ctf_filter,
    estimate_norm,
    gradient,
    matrix_operator,
    projection_dft,
    radon,
)

from oracles import dense_operator_matrix, dense_radon_matrix

LAMBDA = 0.31e-10


def small_geometry(n=8, m=None, n_angles=12, distance=0.5, pixel=1e-6):
    m = m or int(np.ceil(n * np.sqrt(2))) + 4
    return ScanGeometry(n, pixel, LAMBDA, distance, pixel, m,
                        uniform_angles(n_angles))


def adjoint_defect(op, rng):
    x = rng.standard_normal(op.domain_shape)
    y = rng.standard_normal(op.range_shape)
    if np.iscomplexobj(op.apply(x)):
        y = y + 1j * rng.standard_normal(op.range_shape)
    lhs = np.vdot(y, op.apply(x)).real
    rhs = np.vdot(op.apply_adjoint(y), x).real
    scale = np.linalg.norm(x) * np.linalg.norm(y)
    return abs(lhs - rhs) / scale


class TestRadon:
    def test_axis_aligned_row_of_unit_pixels(self):
        # ray through one full row of a 2x2 grid of 1 m pixels -> 2 m
        g = ScanGeometry(2, 1.0, LAMBDA, 0.0, 1.0, 4, (0.0, 90.0))
        sino = radon(g).apply(np.ones((2, 2)))
        assert sino[1, 1] == pytest.approx(2.0, abs=1e-12)
        assert sino[2, 1] == pytest.approx(2.0, abs=1e-12)

    def test_zero_image_zero_sinogram(self):
        g = small_geometry()
        assert np.all(radon(g).apply(np.zeros((8, 8))) == 0.0)

    def test_adjoint_identity_8x8(self):
        g = small_geometry(n=8, n_angles=12)
        A = radon(g)
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert adjoint_defect(A, rng) < 1e-10

    def test_matches_independent_clipping_oracle(self):
        g = small_geometry(n=7, m=13, n_angles=9)
        A = radon(g)
        dense_fast = dense_operator_matrix(A)
        oracle = dense_radon_matrix(g)
        # oracle rows are angle-major (a*m + k); fast assembly is (k, a) raveled
        m, na = A.range_shape
        perm = np.array([a * m + k for k in range(m) for a in range(na)])
        assert np.allclose(dense_fast, oracle[perm], rtol=0, atol=1e-18)

    def test_center_ray_chord_lengths(self):
        # odd detector count so the t = 0 ray exists; chord through the
        # bounding square is s / max(|sin|, |cos|)
        n, h, m = 15, 1e-6, 31
        angles = (0.0, 17.3, 45.0, 60.0, 90.0, 120.7, 175.0)
        g = ScanGeometry(n, h, LAMBDA, 0.5, h, m, angles)
        sino = radon(g).apply(np.ones((n, n)))
        k0 = (m - 1) // 2
        for i, th in enumerate(angles):
            thr = np.deg2rad(th)
            chord = n * h / max(abs(np.sin(thr)), abs(np.cos(thr)))
            assert sino[k0, i] == pytest.approx(chord, abs=1e-9 * chord)

    def test_entries_in_meters(self):
        # doubling the pixel size doubles every path length
        g1 = small_geometry(n=8, pixel=1e-6)
        g2 = small_geometry(n=8, pixel=2e-6)
        x = np.random.default_rng(3).standard_normal((8, 8))
        assert np.allclose(radon(g2).apply(x), 2.0 * radon(g1).apply(x))


class TestGradient:
    def test_constant_image_zero_gradient(self):
        D = gradient(16)
        assert np.all(D.apply(np.full((16, 16), 3.7)) == 0.0)

    def test_unit_step_between_columns(self):
        n = 8
        u = np.zeros((n, n))
        u[:, 4:] = 1.0
        g = gradient(n).apply(u)
        assert np.all(g[1] == 0.0)
        nz = np.nonzero(g[0])
        assert set(nz[1].tolist()) == {3}
        assert np.all(g[0][:, 3] == 1.0)

    def test_neumann_boundary(self):
        n = 6
        u = np.random.default_rng(1).standard_normal((n, n))
        g = gradient(n).apply(u)
        assert np.all(g[0][:, -1] == 0.0)
        assert np.all(g[1][-1, :] == 0.0)

    def test_adjoint_is_negative_divergence_exact(self):
        D = gradient(9)
        dense = dense_operator_matrix(D)
        rng = np.random.default_rng(2)
        for _ in range(10):
            y = rng.standard_normal(D.range_shape)
            ref = (dense.T @ y.ravel()).reshape(9, 9)
            assert np.allclose(D.apply_adjoint(y), ref, atol=1e-14)

    def test_norm_bounded_by_sqrt8(self):
        # classical bound for the forward-difference stencil
        for n in (4, 16, 33):
            est = estimate_norm(gradient(n), iters=64, seed=0)
            assert est <= 1.05 * np.sqrt(8.0) + 1e-9


class TestProjectionDFT:
    def test_parseval(self):
        g = small_geometry(n=16, n_angles=10)
        F = projection_dft(g)
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.standard_normal(F.domain_shape)
            assert np.linalg.norm(F.apply(x)) == pytest.approx(
                np.linalg.norm(x), rel=1e-12
            )

    def test_hermitian_symmetry_for_real_input(self):
        g = small_geometry(n=8, n_angles=6)
        spec = projection_dft(g).apply(
            np.random.default_rng(1).standard_normal((g.n_detector, 6))
        )
        m = g.n_detector
        conj_flip = np.conj(spec[(-np.arange(m)) % m, :])
        assert np.allclose(spec, conj_flip, rtol=0, atol=1e-12 * np.abs(spec).max())

    def test_constant_projection_is_dc_only(self):
        g = small_geometry(n=8, n_angles=3)
        x = np.full((g.n_detector, 3), 2.5)
        spec = projection_dft(g).apply(x)
        assert np.allclose(spec[1:, :], 0.0, atol=1e-12)
        assert spec[0, 0] == pytest.approx(2.5 * np.sqrt(g.n_detector))

    def test_adjoint_is_inverse(self):
        g = small_geometry(n=8, n_angles=4)
        F = projection_dft(g)
        x = np.random.default_rng(2).standard_normal(F.domain_shape)
        assert np.allclose(F.apply_adjoint(F.apply(x)).real, x, atol=1e-13)


class TestCTFFilter:
    def test_dc_weight_is_exactly_minus_two(self):
        f = ctf_filter(small_geometry(), sigma=-1.95e4)
        assert f.weights[0] == -2.0
        assert f.psi[0] == 0.0

    def test_contact_plane_all_minus_two(self):
        f = ctf_filter(small_geometry(distance=0.0), sigma=-123.0)
        assert np.all(f.weights == -2.0)

    def test_psi_value_at_half_nyquist(self):
        # pi * 0.31e-10 * 0.5 * (5e5)^2 = 12.1737 rad, hand-evaluated
        g = ScanGeometry(64, 1e-6, 0.31e-10, 0.5, 1e-6, 192,
                         uniform_angles(8))
        f = ctf_filter(g, sigma=-1.95e4)
        omega = g.frequencies()
        k = int(np.argmin(np.abs(np.abs(omega) - 5e5)))
        assert abs(omega[k]) == pytest.approx(5e5)
        assert f.psi[k] == pytest.approx(12.1737, abs=1e-3)

    def test_even_in_frequency(self):
        g = small_geometry(n=16, m=25)
        f = ctf_filter(g, sigma=-300.0)
        m = 25
        idx = (-np.arange(m)) % m
        assert np.allclose(f.psi, f.psi[idx])
        assert np.allclose(f.weights, f.weights[idx])
        assert np.all(f.psi >= 0.0)

    def test_zero_crossings_satisfy_duality_tangent(self):
        # roots of -2cos(psi) + 2*sigma*sin(psi) satisfy tan(psi) = 1/sigma;
        # locate roots by bisection on a dense psi grid
        sigma = -50.0
        psi = np.linspace(0.0, 12.0, 20001)
        w = -2.0 * np.cos(psi) + 2.0 * sigma * np.sin(psi)
        sign_flips = np.nonzero(np.sign(w[:-1]) * np.sign(w[1:]) < 0)[0]
        assert sign_flips.size > 0
        for i in sign_flips:
            a, b = psi[i], psi[i + 1]
            for _ in range(60):
                mid = 0.5 * (a + b)
                if (-2 * np.cos(a) + 2 * sigma * np.sin(a)) * (
                    -2 * np.cos(mid) + 2 * sigma * np.sin(mid)
                ) <= 0:
                    b = mid
                else:
                    a = mid
            root = 0.5 * (a + b)
            assert np.tan(root) == pytest.approx(1.0 / sigma, abs=1e-6)


class TestACDOperator:
    def test_zero_image_zero_spectrum(self):
        g = small_geometry(n=8)
        K = acd_operator(g, sigma=-1.95e4)
        assert np.all(K.apply(np.zeros((8, 8))) == 0.0)

    def test_composition_equals_factor_application(self):
        g = small_geometry(n=12, n_angles=7)
        sigma = -1.95e4
        K = acd_operator(g, sigma)
        A = radon(g)
        w = ctf_filter(g, sigma).weights[:, None]
        x = np.random.default_rng(0).standard_normal((12, 12))
        step = g.wavenumber_scale * w * np.fft.fft(A.apply(x), axis=0, norm="ortho")
        composed = K.apply(x)
        assert np.linalg.norm(composed - step) <= 1e-12 * np.linalg.norm(step)

    def test_adjoint_identity(self):
        g = small_geometry(n=10, n_angles=9)
        K = acd_operator(g, sigma=-2e3)
        rng = np.random.default_rng(4)
        for _ in range(20):
            assert adjoint_defect(K, rng) < 1e-10 * K.norm_estimate

    def test_adjoint_returns_real(self):
        g = small_geometry(n=8)
        K = acd_operator(g, sigma=-100.0)
        y = np.random.default_rng(1).standard_normal(K.range_shape) + 1j
        out = K.apply_adjoint(y)
        assert not np.iscomplexobj(out)

    def test_dense_oracle_equivalence(self):
        # product of independently assembled factors: clipping-oracle Radon,
        # explicit DFT matrix, diagonal weights, 2*pi/lambda scale
        g = small_geometry(n=6, m=10, n_angles=5)
        sigma = -1.5e3
        K = acd_operator(g, sigma)
        dense_fast = dense_operator_matrix(K)

        m, na = g.n_detector, g.n_angles
        oracle_radon = dense_radon_matrix(g)
        perm = np.array([a * m + k for k in range(m) for a in range(na)])
        radon_kA = oracle_radon[perm]  # rows ordered (k, a)
        idx = np.arange(m)
        dft = np.exp(-2j * np.pi * np.outer(idx, idx) / m) / np.sqrt(m)
        w = ctf_filter(g, sigma).weights
        dense_oracle = np.zeros((m * na, 36), dtype=complex)
        for a in range(na):
            rows = np.arange(m) * na + a
            dense_oracle[rows] = (w[:, None] * dft) @ radon_kA[rows]
        dense_oracle *= g.wavenumber_scale
        assert np.allclose(dense_fast, dense_oracle, rtol=1e-10,
                           atol=1e-10 * np.abs(dense_oracle).max())


class TestEstimateNorm:
    def test_diagonal_operator(self):
        d = np.array([1.0, 3.0, 2.0])
        op = LinearOperator((3,), (3,), lambda x: d * x, lambda y: d * y)
        assert estimate_norm(op, iters=200, seed=0) == pytest.approx(3.0 * 1.05,
                                                                     rel=1e-8)

    def test_unitary_dft(self):
        g = small_geometry(n=8, n_angles=4)
        assert estimate_norm(projection_dft(g), iters=30, seed=1) == pytest.approx(
            1.05, rel=1e-10
        )

    def test_radon_against_dense_svd(self):
        g = small_geometry(n=8, m=14, n_angles=10)
        A = radon(g)
        dense = dense_operator_matrix(A)
        top = np.linalg.svd(dense, compute_uv=False)[0]
        est = estimate_norm(A, iters=64, seed=0)
        assert abs(est / 1.05 - top) <= 0.02 * top

    def test_monotone_in_iterations(self):
        g = small_geometry(n=8)
        A = radon(g)
        vals = [estimate_norm(A, iters=it, seed=5) for it in (10, 15, 25, 40, 64)]
        for lo, hi in zip(vals, vals[1:]):
            assert hi >= lo - 1e-12 * abs(lo)

    def test_zero_operator(self):
        op = LinearOperator((4,), (4,), lambda x: 0.0 * x, lambda y: 0.0 * y)
        assert estimate_norm(op, iters=16, seed=0) == 0.0

    def test_iters_precondition(self):
        op = LinearOperator((2,), (2,), lambda x: x, lambda y: y)
        with pytest.raises(ValueError):
            estimate_norm(op, iters=5, seed=0)


class TestLinearOperatorShapes:
    def test_domain_shape_checked(self):
        g = small_geometry(n=8)
        with pytest.raises(ValueError, match="domain"):
            radon(g).apply(np.zeros((4, 4)))

    def test_matrix_operator_roundtrip(self):
        rng = np.random.default_rng(0)
        mat = rng.standard_normal((6, 4))
        op = matrix_operator(mat)
        x = rng.standard_normal(4)
        assert np.allclose(op.apply(x), mat @ x)
        y = rng.standard_normal(6)
        assert np.allclose(op.apply_adjoint(y), mat.T @ y)
