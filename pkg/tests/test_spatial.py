"""Spatial operator algebra against dense linear-algebra oracles."""

import numpy as np
import pytest

from semvb.errors import DimensionError, DomainError, SingularityError
from semvb.models import ModelKind
from semvb import spatial

from oracles import dense_M, fd_derivative, schur_conditional


def two_node_raw() -> spatial.SpatialWeights:
    return spatial.SpatialWeights(
        n=2, rows=[0, 1], cols=[1, 0], weights=[1.0, 1.0])


class TestRookLattice:
    def test_degrees_and_row_sums(self):
        W = spatial.build_rook_lattice(3, 4)
        assert W.n == 12
        sums = np.bincount(W.rows, weights=W.weights, minlength=12)
        np.testing.assert_allclose(sums, 1.0, atol=1e-14)
        counts = np.bincount(W.rows, minlength=12)
        # corners touch 2 neighbours, edges 3, interior 4
        assert counts[0] == 2 and counts[3] == 2
        assert counts[1] == 3 and counts[4] == 3
        assert counts[5] == 4 and counts[6] == 4

    def test_adjacency_is_symmetric(self):
        W = spatial.build_rook_lattice(4, 4, row_standardize=False)
        dense = W.csr.toarray()
        np.testing.assert_array_equal(dense, dense.T)

    def test_raw_option(self):
        W = spatial.build_rook_lattice(2, 2, row_standardize=False)
        assert not W.row_standardized
        assert set(np.unique(W.weights)) == {1.0}

    def test_bad_dimensions(self):
        with pytest.raises(DimensionError):
            spatial.build_rook_lattice(0, 5)


class TestWeightsValidation:
    def test_diagonal_rejected(self):
        with pytest.raises(DomainError):
            spatial.SpatialWeights(n=2, rows=[0], cols=[0], weights=[1.0])

    def test_negative_weight_rejected(self):
        with pytest.raises(DomainError):
            spatial.SpatialWeights(n=2, rows=[0], cols=[1], weights=[-0.5])

    def test_row_standardized_flag_checked(self):
        with pytest.raises(DomainError):
            spatial.SpatialWeights(n=2, rows=[0, 1], cols=[1, 0],
                                   weights=[0.5, 1.0], row_standardized=True)

    def test_index_out_of_range(self):
        with pytest.raises(DimensionError):
            spatial.SpatialWeights(n=2, rows=[0], cols=[2], weights=[1.0])


class TestApplyA:
    def test_matches_dense(self):
        rng = np.random.default_rng(0)
        W = spatial.build_rook_lattice(4, 5)
        dense = W.csr.toarray()
        v = rng.standard_normal(20)
        A = np.eye(20) - 0.6 * dense
        np.testing.assert_allclose(spatial.apply_A(W, 0.6, v), A @ v, atol=1e-12)
        np.testing.assert_allclose(spatial.apply_At(W, 0.6, v), A.T @ v, atol=1e-12)

    def test_rho_domain(self):
        W = two_node_raw()
        with pytest.raises(DomainError):
            spatial.apply_A(W, 1.0, np.zeros(2))

    def test_length_mismatch(self):
        W = two_node_raw()
        with pytest.raises(DimensionError):
            spatial.apply_A(W, 0.3, np.zeros(3))


class TestLogdet:
    def test_two_node_hand_value(self):
        # det(A^T A) = det(A)^2 = (1 - 0.25)^2
        W = two_node_raw()
        got = spatial.logdet_M(ModelKind.SEM_GAU, W, 0.5)
        assert got == pytest.approx(2.0 * np.log(0.75), abs=1e-12)

    def test_t_kind_tau_contribution(self):
        # rho = 0 makes A the identity; only the tau determinant remains
        W = spatial.SpatialWeights(n=3, rows=[0, 1, 2], cols=[1, 2, 0],
                                   weights=[1.0, 1.0, 1.0])
        tau = np.full(3, np.e)
        got = spatial.logdet_M(ModelKind.SEM_T, W, 0.0, tau)
        assert got == pytest.approx(-3.0, abs=1e-12)

    def test_matches_slogdet_on_lattice(self):
        W = spatial.build_rook_lattice(5, 5)
        dense = W.csr.toarray()
        for rho in (-0.9, -0.3, 0.0, 0.4, 0.85):
            sign, ld = np.linalg.slogdet(np.eye(25) - rho * dense)
            assert sign > 0
            assert spatial.logdet_A(W, rho) == pytest.approx(ld, abs=1e-10)

    def test_splu_path_matches_eigen_path(self):
        W = spatial.build_rook_lattice(6, 7)
        for rho in (-0.7, 0.2, 0.9):
            assert spatial._logdet_A_splu(W, rho) == pytest.approx(
                spatial.logdet_A(W, rho), abs=1e-9)

    def test_singular_a_raises(self):
        # doubled weights push an eigenvalue to 2, so A is singular at 0.5
        W = spatial.SpatialWeights(n=2, rows=[0, 1], cols=[1, 0],
                                   weights=[2.0, 2.0])
        with pytest.raises(SingularityError):
            spatial.logdet_A(W, 0.5)
        with pytest.raises(SingularityError):
            spatial.logdet_A(W, 0.6)  # determinant has gone negative
        with pytest.raises(SingularityError):
            spatial._logdet_A_splu(W, 0.6)

    def test_tau_required_and_positive(self):
        W = two_node_raw()
        with pytest.raises(DomainError):
            spatial.logdet_M(ModelKind.SEM_T, W, 0.2, None)
        with pytest.raises(DomainError):
            spatial.logdet_M(ModelKind.SEM_T, W, 0.2, np.array([1.0, -1.0]))


class TestTrace:
    def test_matches_dense_inverse(self):
        W = spatial.build_rook_lattice(4, 6)
        dense = W.csr.toarray()
        for rho in (-0.8, 0.1, 0.75):
            expected = np.trace(np.linalg.solve(np.eye(24) - rho * dense, dense))
            assert spatial.trace_AinvW(W, rho) == pytest.approx(expected, abs=1e-10)

    def test_is_derivative_of_logdet(self):
        W = spatial.build_rook_lattice(5, 4)
        for rho in (-0.5, 0.3, 0.8):
            fd = fd_derivative(lambda r: spatial.logdet_A(W, r), rho, h=1e-6)
            assert -fd == pytest.approx(spatial.trace_AinvW(W, rho), rel=1e-6)


class TestQuadForm:
    def test_matches_dense(self):
        rng = np.random.default_rng(3)
        W = spatial.build_rook_lattice(4, 4)
        dense = W.csr.toarray()
        r = rng.standard_normal(16)
        tau = rng.gamma(3.0, 1.0, size=16)
        got = spatial.quad_form_M(ModelKind.SEM_GAU, W, 0.55, None, r)
        assert got == pytest.approx(r @ dense_M(dense, 0.55, None) @ r, rel=1e-12)
        got_t = spatial.quad_form_M(ModelKind.YJ_SEM_T, W, -0.4, tau, r)
        assert got_t == pytest.approx(r @ dense_M(dense, -0.4, tau) @ r, rel=1e-12)


class TestPartition:
    def test_from_mask(self):
        mask = np.array([False, True, True, False, True])
        p = spatial.Partition.from_missing_mask(mask)
        np.testing.assert_array_equal(p.observed_idx, [0, 3])
        np.testing.assert_array_equal(p.unobserved_idx, [1, 2, 4])
        assert p.n == 5

    def test_validation(self):
        with pytest.raises(DomainError):
            spatial.Partition(observed_idx=[0, 1], unobserved_idx=[1, 2])
        with pytest.raises(DomainError):
            spatial.Partition(observed_idx=[0, 2], unobserved_idx=[3])
        with pytest.raises(DomainError):
            spatial.Partition(observed_idx=[2, 0], unobserved_idx=[1])


class TestConditionalGaussian:
    @pytest.mark.parametrize("kind,seed", [(ModelKind.SEM_GAU, 0),
                                           (ModelKind.SEM_T, 1)])
    def test_against_schur_oracle(self, kind, seed):
        rng = np.random.default_rng(seed)
        W = spatial.build_rook_lattice(3, 4)
        dense = W.csr.toarray()
        n = 12
        tau = rng.gamma(2.0, 1.0, size=n) if kind.student_t else None
        sigma2 = 0.7
        unknown = np.array([2, 5, 6, 10])
        known = np.setdiff1d(np.arange(n), unknown)
        part = spatial.Partition(observed_idx=known, unobserved_idx=unknown)
        r_known = rng.standard_normal(known.size)

        cond = spatial.conditional_gaussian(kind, W, 0.6, tau, part, r_known)

        cov = sigma2 * np.linalg.inv(dense_M(dense, 0.6, tau))
        mean0 = np.zeros(n)
        om, oc = schur_conditional(mean0, cov, known, unknown, r_known)
        np.testing.assert_allclose(cond.mean_offset, om, atol=1e-10)
        np.testing.assert_allclose(cond.covariance(sigma2), oc, atol=1e-10)

    def test_sample_moments(self):
        rng = np.random.default_rng(7)
        W = spatial.build_rook_lattice(3, 3)
        part = spatial.Partition.from_missing_mask(
            np.array([0, 1, 0, 0, 1, 0, 0, 0, 0], dtype=bool))
        r_known = rng.standard_normal(7)
        cond = spatial.conditional_gaussian(ModelKind.SEM_GAU, W, 0.5, None,
                                            part, r_known)
        draws = np.stack([cond.sample(2.0, rng.standard_normal(2))
                          for _ in range(40000)])
        np.testing.assert_allclose(draws.mean(axis=0), cond.mean_offset, atol=0.03)
        np.testing.assert_allclose(np.cov(draws.T), cond.covariance(2.0), atol=0.05)

    def test_shape_errors(self):
        W = spatial.build_rook_lattice(2, 2)
        part = spatial.Partition(observed_idx=[0, 1, 2], unobserved_idx=[3])
        with pytest.raises(DimensionError):
            spatial.conditional_gaussian(ModelKind.SEM_GAU, W, 0.2, None, part,
                                         np.zeros(2))
