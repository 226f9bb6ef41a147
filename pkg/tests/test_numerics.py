import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from osnet.numerics import (EigenConvergenceError, eigenvalues, elementwise_abs, hessenberg,
                            leading_singular_pair, perron_root, spectral_norm, trapezoid_integral)
from oracles import jacobi_singular_values


def sorted_complex(v):
    v = np.asarray(v, dtype=complex)
    return v[np.lexsort((v.imag.round(9), v.real.round(9)))]


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_jacobi_oracle_itself():
    a = np.diag([3.0, 1.0, 2.0])
    assert np.allclose(jacobi_singular_values(a), [3, 2, 1])
    assert np.allclose(jacobi_singular_values([[0.0, 2.0], [0.0, 0.0]]), [2, 0])


class TestSpectralNorm:
    def test_identity(self):
        assert spectral_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-12)

    def test_nilpotent(self):
        assert spectral_norm([[0.0, 2.0], [0.0, 0.0]]) == pytest.approx(2.0, rel=1e-12)

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((2, 3))) == 0.0

    def test_against_jacobi_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.standard_normal((5, 7))
            assert abs(spectral_norm(a) - jacobi_singular_values(a)[0]) <= 1e-8

    def test_singular_pair(self):
        a = np.random.default_rng(2).standard_normal((4, 6))
        s, u, v = leading_singular_pair(a)
        assert np.allclose(a @ v, s * u, atol=1e-9)
        assert np.allclose(a.T @ u, s * v, atol=1e-9)

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            spectral_norm(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            spectral_norm([[np.nan]])

    def test_deterministic(self):
        a = np.random.default_rng(3).standard_normal((6, 6))
        assert spectral_norm(a) == spectral_norm(a)

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, (4, 3), elements=finite))
    def test_transpose_invariance(self, a):
        assert abs(spectral_norm(a) - spectral_norm(a.T)) <= 1e-10 * max(1.0, spectral_norm(a))

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, (3, 4), elements=finite), arrays(float, (4, 2), elements=finite))
    def test_submultiplicative(self, a, b):
        assert spectral_norm(a @ b) <= spectral_norm(a) * spectral_norm(b) * (1 + 1e-10) + 1e-9


class TestPerronRoot:
    def test_identity(self):
        assert perron_root(np.eye(4)) == pytest.approx(1.0, abs=1e-12)

    def test_two_by_two(self):
        assert perron_root([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx(3.0, abs=1e-10)

    def test_against_eigensolver(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            m = rng.random((6, 6))
            assert abs(perron_root(m) - np.max(np.abs(eigenvalues(m)))) <= 1e-8

    def test_reducible_and_periodic(self):
        # permutation matrix: eigenvalues on the unit circle, power iteration cycles
        p = np.roll(np.eye(3), 1, axis=0)
        assert perron_root(p) == pytest.approx(1.0, abs=1e-8)
        assert perron_root([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(0.0, abs=1e-8)
        assert perron_root(np.diag([0.5, 2.0, 1.0])) == pytest.approx(2.0, abs=1e-8)

    def test_rejects_negative_and_nonsquare(self):
        with pytest.raises(ValueError):
            perron_root([[1.0, -0.1], [0.0, 1.0]])
        with pytest.raises(ValueError):
            perron_root(np.ones((2, 3)))

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, (4, 4), elements=st.floats(0, 5)))
    def test_bounded_by_spectral_norm(self, m):
        assert perron_root(m) <= spectral_norm(m) + 1e-9


class TestEigenvalues:
    def test_diagonal(self):
        assert np.allclose(sorted_complex(eigenvalues(np.diag([1.0, 2.0, 3.0]))), [1, 2, 3])

    def test_rotation(self):
        ev = sorted_complex(eigenvalues([[0.0, 1.0], [-1.0, 0.0]]))
        assert np.allclose(ev, [-1j, 1j], atol=1e-12)

    def test_companion_cubic(self):
        c = [[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
        assert np.allclose(sorted_complex(eigenvalues(c)), [1, 2, 3], atol=1e-9)

    def test_one_by_one(self):
        assert np.allclose(eigenvalues([[4.0]]), [4.0])

    def test_against_numpy(self):
        rng = np.random.default_rng(5)
        for n in (2, 3, 5, 8, 17):
            for _ in range(5):
                m = rng.standard_normal((n, n))
                ours = sorted_complex(eigenvalues(m))
                ref = sorted_complex(np.linalg.eigvals(m))
                assert np.max(np.abs(ours - ref)) <= 1e-8 * max(1.0, np.abs(m).max() * n)

    def test_conjugate_pairs_exact(self):
        m = np.random.default_rng(6).standard_normal((7, 7))
        ev = eigenvalues(m)
        assert np.allclose(sorted_complex(ev), sorted_complex(np.conj(ev)), atol=0)

    def test_order_cap(self):
        with pytest.raises(ValueError):
            eigenvalues(np.eye(65))

    def test_convergence_error_type(self):
        assert issubclass(EigenConvergenceError, ArithmeticError)

    def test_hessenberg_similarity(self):
        m = np.random.default_rng(7).standard_normal((6, 6))
        h = hessenberg(m)
        assert np.allclose(np.tril(h, -2), 0)
        assert np.trace(h) == pytest.approx(np.trace(m))
        assert np.allclose(sorted_complex(np.linalg.eigvals(h)), sorted_complex(np.linalg.eigvals(m)))

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, (4, 4), elements=finite))
    def test_transpose_same_spectrum(self, m):
        a, b = sorted_complex(eigenvalues(m)), sorted_complex(eigenvalues(m.T))
        # eigenvalues of defective matrices are only sqrt(eps)-conditioned
        scale = max(1.0, np.abs(m).max())
        assert np.max(np.abs(np.sort(np.abs(a)) - np.sort(np.abs(b)))) <= 1e-6 * scale

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, (5, 5), elements=finite))
    def test_skew_spectrum_is_imaginary(self, a):
        assert np.max(np.abs(eigenvalues(a - a.T).real)) <= 1e-8 * max(1.0, np.abs(a).max())


class TestElementwiseAndQuadrature:
    def test_abs(self):
        assert np.array_equal(elementwise_abs([[-1.0, 2.0], [0.0, -3.0]]), [[1, 2], [0, 3]])
        assert np.array_equal(elementwise_abs(np.zeros((2, 2))), np.zeros((2, 2)))
        s = np.array([[1.0, -2.0], [-2.0, 3.0]])
        out = elementwise_abs(s)
        assert np.array_equal(out, out.T)

    def test_abs_does_not_mutate(self):
        a = np.array([[-1.0]])
        elementwise_abs(a)
        assert a[0, 0] == -1.0

    def test_constant(self):
        samples = [(t, np.eye(2)) for t in np.linspace(0, 3.0, 7)]
        assert np.allclose(trapezoid_integral(samples), 3.0 * np.eye(2))

    def test_diag_t(self):
        samples = [(t, np.diag([t, t])) for t in np.linspace(0, 1, 101)]
        assert np.allclose(trapezoid_integral(samples), 0.5 * np.eye(2), atol=1e-4)

    def test_linear_exact(self):
        f = lambda t: np.array([[2 * t + 1.0]])
        assert trapezoid_integral([(0.5, f(0.5)), (2.0, f(2.0))])[0, 0] == pytest.approx(5.25, abs=1e-14)

    def test_rejects_bad_samples(self):
        with pytest.raises(ValueError):
            trapezoid_integral([(0.0, np.eye(2))])
        with pytest.raises(ValueError):
            trapezoid_integral([(1.0, np.eye(2)), (0.0, np.eye(2))])
        with pytest.raises(ValueError):
            trapezoid_integral([(0.0, np.eye(2)), (1.0, np.eye(3))])
