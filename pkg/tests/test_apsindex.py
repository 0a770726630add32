import numpy as np
import pytest

from apsflow.apsindex import (
    aps_boundary_data,
    assemble_discretized_operator,
    lorentzian_index_projection,
    lorentzian_index_subspace,
    lorentzian_main_check,
    operator_triplets,
    riemannian_index_discretized,
    riemannian_kernel_shooting,
    riemannian_main_check,
)
from apsflow.errors import StiffnessError
from apsflow.evolution import propagate
from apsflow.families import (
    constant_family,
    counterexample_family,
    endpoint_regularize,
    linear_family,
)
from apsflow.matrixcore import HermitianMatrix
from apsflow.spectralflow import spectral_flow
from apsflow.zoo import random_trig_family, singular_endpoint_family


def diag(*vals):
    return HermitianMatrix(np.diag(np.asarray(vals, dtype=float)))


class TestBoundaryData:
    def test_dimensions_complement(self, rng):
        f = random_trig_family(5, rng)
        data = aps_boundary_data(f)
        assert data.left_subspace.ambient_dim == 5
        assert 0 <= data.left_subspace.dimension <= 5

    def test_zero_counts_to_the_right(self):
        f = constant_family(diag(0.0, -1.0), 1.0)
        data = aps_boundary_data(f)
        assert data.left_subspace.dimension == 1  # only the -1 eigenline
        assert data.right_subspace.dimension == 1  # the zero eigenline


class TestTransportIndexRoutes:
    def test_constant_invertible_zero(self):
        f = constant_family(diag(-1.0, 1.0), 1.0)
        p = propagate(f, 256)
        rep = lorentzian_index_projection(f, p)
        assert (rep.ker_dim, rep.coker_dim, rep.index) == (0, 0, 0)
        rep2 = lorentzian_index_subspace(f, p)
        assert (rep2.ker_dim, rep2.coker_dim, rep2.index) == (0, 0, 0)

    def test_scalar_crossing_by_hand(self):
        # oracle: H_<0(0) is everything, A(1) = 1/2 >= 0 kills the negative
        # subspace at the far end, so the restriction is the zero map C -> 0
        f = linear_family(diag(-0.5), diag(1.0), 1.0)
        p = propagate(f, 256)
        rep = lorentzian_index_projection(f, p)
        assert (rep.ker_dim, rep.coker_dim, rep.index) == (1, 0, 1)

    def test_counterexample_single_block(self):
        f = counterexample_family([1.0])
        p = propagate(f, 2**10)
        rep = lorentzian_index_subspace(f, p)
        assert (rep.ker_dim, rep.coker_dim, rep.index) == (1, 1, 0)
        # the kernel is the initial negative eigenline, carried onto the
        # positive one by the block's closed-form swap
        cos = rep.diagnostics["principal_cosines"]
        assert cos[0] > 1.0 - 1e-9
        # and that line is literally span(e1)
        from apsflow.evolution import q_between
        from apsflow.matrixcore import (
            NEGATIVE_AXIS,
            NONNEGATIVE_AXIS,
            Subspace,
            eigh,
            spectral_subspace,
            subspace_intersection,
        )

        h_neg0 = spectral_subspace(eigh(f.at(0.0)), NEGATIVE_AXIS)
        h_pos1 = spectral_subspace(eigh(f.at(1.0)), NONNEGATIVE_AXIS)
        pulled = Subspace(2, q_between(p, 0.0, 1.0) @ h_pos1.basis)
        ker = subspace_intersection(h_neg0, pulled)
        assert np.allclose(np.abs(ker.basis.ravel()), [1.0, 0.0], atol=1e-5)

    def test_counterexample_m3_dimensions(self):
        f = counterexample_family([1.0, 2.0, 3.0])
        p = propagate(f, 2**10)
        rep_p = lorentzian_index_projection(f, p)
        rep_s = lorentzian_index_subspace(f, p)
        assert (rep_p.ker_dim, rep_p.coker_dim, rep_p.index) == (3, 3, 0)
        assert (rep_s.ker_dim, rep_s.coker_dim, rep_s.index) == (3, 3, 0)

    def test_cross_method_agreement_random(self, rng):
        for _ in range(10):
            f = random_trig_family(int(rng.choice([2, 4, 8])), rng)
            p = propagate(f, 512)
            a = lorentzian_index_projection(f, p)
            b = lorentzian_index_subspace(f, p)
            assert (a.ker_dim, a.coker_dim, a.index) == (b.ker_dim, b.coker_dim, b.index)

    def test_evolved_endpoint_projection_identity(self, rng):
        # conjugating the t=0 projection is a no-op, so replacing the left
        # member of the pair by its evolved version cannot change the report
        from apsflow.evolution import evolved_projection
        from apsflow.matrixcore import NEGATIVE_AXIS, eigh, relative_index, spectral_projection

        f = random_trig_family(3, rng)
        p = propagate(f, 256)
        left_plain = spectral_projection(eigh(f.at(0.0)), NEGATIVE_AXIS)
        left_evolved = evolved_projection(f, p, 0.0, NEGATIVE_AXIS)
        right = evolved_projection(f, p, 1.0, NEGATIVE_AXIS)
        a = relative_index(left_plain, right, tau_rank=1e-4)
        b = relative_index(left_evolved, right, tau_rank=1e-4)
        assert (a.ker_dim, a.coker_dim, a.index) == (b.ker_dim, b.coker_dim, b.index)


class TestTransportMainCheck:
    def test_constant(self):
        f = constant_family(diag(-1.0, 1.0), 1.0)
        p = propagate(f, 256)
        rec = lorentzian_main_check(f, p)
        assert rec.passed
        assert all(e.index == 0 and e.sfl == 0 for e in rec.checkpoints)

    def test_scalar_crossing_checkpoints(self):
        f = linear_family(diag(-0.5), diag(1.0), 1.0)
        p = propagate(f, 256)
        rec = lorentzian_main_check(f, p)
        assert rec.passed
        for e in rec.checkpoints:
            assert e.index == (1 if e.t >= 0.5 else 0)

    def test_counterexample_checkpoints(self):
        f = counterexample_family([1.0, 2.0, 3.0])
        p = propagate(f, 2**10)
        rec = lorentzian_main_check(f, p)
        assert rec.passed
        assert all(e.index == 0 and e.sfl == 0 for e in rec.checkpoints)
        final = rec.checkpoints[-1]
        assert final.t == pytest.approx(1.0) and final.ker_dim == 3

    def test_default_checkpoint_count(self, rng):
        f = random_trig_family(2, rng)
        p = propagate(f, 256)
        rec = lorentzian_main_check(f, p)
        assert len(rec.checkpoints) == 8
        assert rec.checkpoints[-1].t == pytest.approx(1.0)


class TestDiscretizedOperator:
    def test_shape_matches_boundary_ranks(self, rng):
        f = random_trig_family(3, rng)
        disc = assemble_discretized_operator(f, 16)
        r1 = 3 - disc.left_rank  # rank of the nonnegative projection at 0
        r2 = 3 - disc.right_rank  # rank of the negative projection at T
        assert disc.matrix.shape == (16 * 3, 17 * 3 - r1 - r2)

    def test_triplets_cover_nonzeros(self, rng):
        f = random_trig_family(2, rng)
        disc = assemble_discretized_operator(f, 8)
        trips = operator_triplets(disc)
        rebuilt = np.zeros_like(disc.matrix)
        for r, c, re, im in trips:
            rebuilt[r, c] = re + 1j * im
        assert np.array_equal(rebuilt, disc.matrix)

    def test_scalar_crossing_dimensions(self):
        # oracle: no boundary constraints bind (H_<0(0) and H_>=0(1) are all
        # of C), so the domain has M+1 slices against M equations
        f = linear_family(diag(-0.5), diag(1.0), 1.0)
        disc = assemble_discretized_operator(f, 64)
        assert disc.matrix.shape == (64, 65)

    def test_grid_minimum(self, rng):
        f = random_trig_family(2, rng)
        with pytest.raises(ValueError):
            assemble_discretized_operator(f, 3)


class TestRiemannianDiscretized:
    def test_scalar_crossing(self):
        f = linear_family(diag(-0.5), diag(1.0), 1.0)
        rep = riemannian_index_discretized(f, 64)
        assert (rep.ker_dim, rep.coker_dim, rep.index) == (1, 0, 1)

    def test_constant_positive(self):
        # oracle for the recursion: f_0 is unconstrained but the decaying
        # solution must satisfy f_M in H_>=0 = C, while membership of f_0 in
        # H_<0(0) = {0} forces f identically zero
        f = constant_family(diag(1.0), 1.0)
        rep = riemannian_index_discretized(f, 64)
        assert (rep.ker_dim, rep.coker_dim, rep.index) == (0, 0, 0)

    def test_constant_negative(self):
        f = constant_family(diag(-1.0), 1.0)
        rep = riemannian_index_discretized(f, 64)
        assert (rep.ker_dim, rep.coker_dim, rep.index) == (0, 0, 0)

    def test_grid_stability(self):
        f = linear_family(diag(-0.5), diag(1.0), 1.0)
        dims = [
            (r.ker_dim, r.coker_dim)
            for r in (riemannian_index_discretized(f, m) for m in (32, 64, 128))
        ]
        assert dims[0] == dims[1] == dims[2] == (1, 0)

    def test_counterexample_kernels(self):
        f = counterexample_family([1.0, 2.0])
        rep = riemannian_index_discretized(f, 64)
        # the transport swap is a feature of d/dt - iA; for d/dt + A the
        # dimension count still forces index 0 and the kernel pairs off
        assert rep.index == 0
        assert rep.ker_dim == rep.coker_dim

    def test_forced_index_note_present(self, rng):
        f = random_trig_family(2, rng)
        rep = riemannian_index_discretized(f, 32)
        assert "dimension counting" in rep.diagnostics["note"]

    def test_stiffness_guard(self):
        f = constant_family(diag(80.0), 1.0)
        with pytest.raises(StiffnessError):
            riemannian_index_discretized(f, 32)

    def test_additivity_at_invertible_interior_point(self, rng):
        for _ in range(5):
            f = random_trig_family(3, rng)
            s = 0.5
            if min(np.abs(np.linalg.eigvalsh(f.at(s).entries))) < 1e-6:
                continue
            whole = riemannian_index_discretized(f, 64).index
            left = riemannian_index_discretized(f.restricted(0.0, s), 32).index
            right = riemannian_index_discretized(f.restricted(s, 1.0), 32).index
            assert whole == left + right


class TestRiemannianShooting:
    def test_scalar_crossing(self):
        f = linear_family(diag(-0.5), diag(1.0), 1.0)
        rep = riemannian_kernel_shooting(f)
        assert (rep.ker_dim, rep.coker_dim, rep.index) == (1, 0, 1)

    def test_constant_positive_trivial_kernel(self):
        f = constant_family(diag(1.0), 1.0)
        rep = riemannian_kernel_shooting(f)
        assert rep.ker_dim == 0

    def test_agrees_with_discretized(self, rng):
        for _ in range(8):
            f = random_trig_family(int(rng.choice([2, 4])), rng)
            if f.norm_bound() > 10.0:
                continue
            shoot = riemannian_kernel_shooting(f)
            disc = riemannian_index_discretized(f, 64)
            assert shoot.ker_dim == disc.ker_dim
            assert shoot.coker_dim == disc.coker_dim


class TestRiemannianMainCheck:
    def test_constant_invertible(self):
        rec = riemannian_main_check(constant_family(diag(-1.0, 1.0), 1.0))
        assert rec.passed and not rec.regularized
        assert rec.sfl_raw == rec.index_raw == 0

    def test_scalar_crossing(self):
        rec = riemannian_main_check(linear_family(diag(-0.5), diag(1.0), 1.0))
        assert rec.passed
        assert rec.sfl_raw == rec.index_raw == 1

    def test_singular_start_triggers_regularization(self):
        rec = riemannian_main_check(linear_family(diag(0.0), diag(1.0), 1.0))
        assert rec.regularized and rec.passed
        assert rec.sfl_raw == 0  # starts at zero, already nonnegative
        assert rec.sfl_regularized == 0 and rec.index_regularized == 0

    def test_random_singular_endpoints(self, rng):
        for _ in range(5):
            f = singular_endpoint_family(3, rng)
            rec = riemannian_main_check(f, 48)
            assert rec.regularized and rec.passed


class TestAmbiguousCutAdvice:
    def test_error_recommends_regularization(self):
        # an eigenvalue in the ambiguous band (above snapping, below the gap
        # tolerance) at the far endpoint cannot be classified
        f = constant_family(diag(5e-8, 1.0), 1.0)
        p = propagate(f, 64)
        from apsflow.errors import AmbiguousSpectralCutError

        with pytest.raises(AmbiguousSpectralCutError, match="endpoint_regularize"):
            lorentzian_index_projection(f, p)


class TestImportedPropagatorReplay:
    def test_external_propagator_through_index_pipeline(self, tmp_path):
        from apsflow.evolution import read_propagator, write_propagator

        f = counterexample_family([1.0, 2.0])
        p = propagate(f, 2**10)
        path = tmp_path / "prop.json"
        write_propagator(p, path)
        replayed = read_propagator(path)
        rep = lorentzian_index_subspace(f, replayed)
        assert (rep.ker_dim, rep.coker_dim, rep.index) == (2, 2, 0)


class TestRegularizationInvariance:
    def test_flow_and_index_unchanged(self, rng):
        for _ in range(5):
            f = singular_endpoint_family(3, rng)
            b = endpoint_regularize(f, 0.1)
            assert spectral_flow(b).value == spectral_flow(f).value
            ra = riemannian_index_discretized(f, 48)
            rb = riemannian_index_discretized(b, 48)
            assert ra.index == rb.index
