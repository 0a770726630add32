import numpy as np
import pytest

from apsflow.errors import ConfigError, DimensionMismatchError, FamilyConstructionError
from apsflow.families import (
    FamilySpec,
    capped_slope_profile,
    constant_family,
    counterexample_family,
    diagonal_path_family,
    endpoint_regularize,
    family_from_spec,
    kernel_projection,
    linear_family,
    matrix_from_pairs,
    matrix_to_pairs,
    quintic_profile,
    read_sample_series,
    sampled_family,
    swap_block_family,
    unitary_conjugated_family,
    write_sample_series,
)
from apsflow.matrixcore import HermitianMatrix
from conftest import random_hermitian_entries, random_unitary


def diag(*vals):
    return HermitianMatrix(np.diag(np.asarray(vals, dtype=float)))


class TestProfiles:
    @pytest.mark.parametrize("profile", [quintic_profile(), capped_slope_profile()])
    def test_endpoint_values(self, profile):
        assert profile.value(0.0) == pytest.approx(0.0, abs=1e-14)
        assert profile.value(1.0) == pytest.approx(np.pi / 2.0, abs=1e-12)
        assert profile.slope(0.0) == pytest.approx(0.0, abs=1e-14)
        assert profile.slope(1.0) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("profile", [quintic_profile(), capped_slope_profile()])
    def test_slope_is_derivative(self, profile):
        h = 1e-6
        for t in np.linspace(2 * h, 1.0 - 2 * h, 23):
            fd = (profile.value(t + h) - profile.value(t - h)) / (2 * h)
            assert fd == pytest.approx(profile.slope(t), abs=1e-7)
            fd2 = (profile.slope(t + h) - profile.slope(t - h)) / (2 * h)
            assert fd2 == pytest.approx(profile.curvature(t), abs=1e-5)

    def test_quintic_max_slope(self):
        slopes = [quintic_profile().slope(t) for t in np.linspace(0, 1, 2001)]
        assert max(slopes) == pytest.approx(15.0 * np.pi / 16.0, rel=1e-6)

    def test_capped_profile_respects_bound(self):
        slopes = [capped_slope_profile().slope(t) for t in np.linspace(0, 1, 2001)]
        assert max(slopes) <= 2.0 + 1e-12


class TestBuilders:
    def test_constant_eval_and_derivative(self):
        f = constant_family(diag(-1.0, 1.0), 1.0)
        assert np.allclose(f.at(0.37).entries, np.diag([-1.0, 1.0]))
        assert np.allclose(f.derivative_at(0.9).entries, 0.0)

    def test_linear_midpoint(self):
        f = linear_family(diag(-0.5), diag(1.0), 1.0)
        assert np.allclose(f.at(0.5).entries, np.diag([0.0]))
        assert np.allclose(f.at(1.0).entries, np.diag([0.5]))

    def test_linear_shifted_spectrum(self):
        # oracle: adding t*I shifts the known eigenvalues -1, 1 by t
        f = linear_family(
            HermitianMatrix(np.array([[0.0, 1.0], [1.0, 0.0]])),
            HermitianMatrix(np.eye(2)),
            1.0,
        )
        for t in [0.0, 0.3, 1.0]:
            w = np.linalg.eigvalsh(f.at(t).entries)
            assert np.allclose(w, [t - 1.0, t + 1.0])

    def test_linear_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            linear_family(diag(1.0), diag(1.0, 2.0), 1.0)

    def test_diagonal_path(self):
        f = diagonal_path_family([-1.0, 1.0], [1.0, 3.0], 2.0)
        assert np.allclose(f.at(1.0).entries, np.diag([0.0, 2.0]))

    def test_out_of_range_time(self):
        f = constant_family(diag(1.0), 1.0)
        with pytest.raises(ValueError):
            f.at(1.5)


class TestSwapBlock:
    def test_vanishes_at_endpoints(self):
        f = swap_block_family(-1.0, 1.0)
        assert np.allclose(f.at(0.0).entries, np.diag([-1.0, 1.0]))
        assert np.allclose(f.at(1.0).entries, np.diag([-1.0, 1.0]))

    def test_eigenvalues_never_vanish(self):
        # oracle: 2x2 characteristic polynomial gives +-sqrt(1 + slope^2)
        f = swap_block_family(-1.0, 1.0)
        prof = quintic_profile()
        for t in np.linspace(0.0, 1.0, 41):
            w = np.linalg.eigvalsh(f.at(t).entries)
            expected = np.sqrt(1.0 + prof.slope(t) ** 2)
            assert np.allclose(w, [-expected, expected], atol=1e-12)

    def test_offdiagonal_norm_bounded_by_max_slope(self):
        f = swap_block_family(2.0, 5.0)
        bound = max(quintic_profile().slope(t) for t in np.linspace(0, 1, 1001))
        for t in np.linspace(0.0, 1.0, 41):
            b = f.at(t).entries - np.diag([2.0, 5.0])
            assert np.linalg.norm(b, 2) <= bound + 1e-12

    def test_profile_injection(self):
        f = swap_block_family(-1.0, 1.0, profile=capped_slope_profile())
        for t in np.linspace(0.0, 1.0, 41):
            b = f.at(t).entries - np.diag([-1.0, 1.0])
            assert np.linalg.norm(b, 2) <= 2.0 + 1e-12


class TestCounterexample:
    def test_single_block_endpoint(self):
        f = counterexample_family([1.0])
        assert np.allclose(f.at(0.0).entries, np.diag([-1.0, 1.0]))

    def test_block_structure(self):
        f = counterexample_family([1.0, 2.0, 3.0])
        assert f.dim == 6
        for t in np.linspace(0.0, 1.0, 9):
            a = f.at(t).entries
            for i in range(3):
                for j in range(3):
                    if i != j:
                        assert np.all(a[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] == 0.0)

    def test_rejects_bad_lambdas(self):
        with pytest.raises(ConfigError):
            counterexample_family([])
        with pytest.raises(ConfigError):
            counterexample_family([1.0, -2.0])
        with pytest.raises(ConfigError):
            counterexample_family([2.0, 1.0])


class TestDerivativeValidation:
    def test_wrong_derivative_warns(self):
        f, g = np.diag([1.0]), np.diag([5.0])
        fam = object.__new__(type(constant_family(diag(1.0), 1.0)))
        from apsflow.families import _validated_family

        fam = _validated_family(1, 1.0, "bad-deriv", lambda t: f * (1 + t), lambda t: g)
        assert any("finite difference" in w for w in fam.construction_warnings)

    def test_wrong_derivative_strict_raises(self):
        from apsflow.families import _validated_family

        with pytest.raises(FamilyConstructionError, match="finite difference"):
            _validated_family(
                1, 1.0, "bad-deriv", lambda t: np.diag([1.0 + t]), lambda t: np.diag([5.0]),
                strict=True,
            )

    def test_correct_derivative_clean(self, rng):
        a = random_hermitian_entries(3, rng)
        b = random_hermitian_entries(3, rng)
        from apsflow.families import _validated_family

        fam = _validated_family(
            3, 1.0, "ok", lambda t: a + np.sin(t) * b, lambda t: np.cos(t) * b
        )
        assert fam.construction_warnings == ()


class TestEndpointRegularize:
    def test_invertible_family_returned_unchanged(self):
        f = constant_family(diag(-1.0, 1.0), 1.0)
        assert endpoint_regularize(f) is f

    def test_zero_start_becomes_identity(self):
        f = linear_family(diag(0.0), diag(1.0), 1.0)
        b = endpoint_regularize(f, 0.2)
        assert np.allclose(b.at(0.0).entries, np.diag([1.0]))

    def test_agrees_in_the_bulk_exactly(self, rng):
        from apsflow.zoo import singular_endpoint_family

        f = singular_endpoint_family(3, rng)
        eps = 0.1
        b = endpoint_regularize(f, eps)
        for t in np.linspace(eps, 1.0 - eps, 7):
            assert np.array_equal(b.at(t).entries, f.at(t).entries)

    def test_endpoints_invertible(self, rng):
        from apsflow.zoo import singular_endpoint_family

        f = singular_endpoint_family(4, rng)
        assert min(np.abs(np.linalg.eigvalsh(f.at(0.0).entries))) < 1e-12
        b = endpoint_regularize(f, 0.1)
        for t in (0.0, 1.0):
            # invertible endpoints, with the former kernel pushed to magnitude ~1
            assert min(np.abs(np.linalg.eigvalsh(b.at(t).entries))) >= 1e-9
            former_kernel = kernel_projection(f.at(t))
            moved = b.at(t).entries @ former_kernel - former_kernel
            assert np.max(np.abs(moved)) <= 1e-9

    def test_kernel_projection(self):
        p = kernel_projection(diag(0.0, 2.0))
        assert np.allclose(p, np.diag([1.0, 0.0]))

    def test_rejects_bad_epsilon(self):
        f = constant_family(diag(0.0), 1.0)
        with pytest.raises(ConfigError):
            endpoint_regularize(f, 0.7)


class TestSampledFamily:
    def test_interpolates_linearly(self):
        f = sampled_family([0.0, 1.0], [np.diag([0.0]), np.diag([1.0])])
        assert np.allclose(f.at(0.5).entries, np.diag([0.5]))

    def test_equal_endpoints_constant(self):
        f = sampled_family([0.0, 1.0], [np.diag([2.0]), np.diag([2.0])])
        for t in np.linspace(0, 1, 5):
            assert np.allclose(f.at(t).entries, np.diag([2.0]))

    def test_exact_on_linear_data(self, rng):
        a = random_hermitian_entries(3, rng)
        b = random_hermitian_entries(3, rng)
        times = [0.0, 0.4, 1.0]
        f = sampled_family(times, [a + t * b for t in times])
        for t in np.linspace(0.0, 1.0, 11):
            assert np.allclose(f.at(t).entries, a + t * b, atol=1e-12)

    def test_flags_piecewise_smoothness(self):
        f = sampled_family([0.0, 1.0], [np.diag([0.0]), np.diag([1.0])])
        assert f.smoothness == "piecewise"
        assert any("piecewise" in w for w in f.construction_warnings)

    def test_rejects_nonmonotone_times(self):
        with pytest.raises(ConfigError):
            sampled_family([0.0, 0.5, 0.5], [np.diag([0.0])] * 3)

    def test_rejects_non_hermitian_sample(self):
        with pytest.raises(ValueError, match="Hermitian"):
            sampled_family([0.0, 1.0], [np.diag([0.0]), np.array([[0.0, 1.0], [0.0, 0.0]])])


class TestConjugation:
    def test_constant_unitary_preserves_spectrum(self, rng):
        f = linear_family(diag(-0.5, 0.5), diag(1.0, 1.0), 1.0)
        u = random_unitary(2, rng)
        g = unitary_conjugated_family(f, lambda t: u)
        for t in np.linspace(0, 1, 7):
            assert np.allclose(
                np.linalg.eigvalsh(g.at(t).entries), np.linalg.eigvalsh(f.at(t).entries)
            )

    def test_rejects_non_unitary(self):
        f = constant_family(diag(1.0, 2.0), 1.0)
        with pytest.raises(ValueError, match="unitary"):
            unitary_conjugated_family(f, lambda t: np.diag([1.0, 2.0]))


class TestRestriction:
    def test_restricted_matches_shifted(self):
        f = linear_family(diag(-0.5), diag(1.0), 1.0)
        g = f.restricted(0.25, 0.75)
        assert g.horizon == pytest.approx(0.5)
        assert np.allclose(g.at(0.0).entries, f.at(0.25).entries)
        assert np.allclose(g.at(0.5).entries, f.at(0.75).entries)

    def test_time_reversed(self):
        f = linear_family(diag(-0.5), diag(1.0), 1.0)
        r = f.time_reversed()
        assert np.allclose(r.at(0.0).entries, f.at(1.0).entries)
        assert np.allclose(r.derivative_at(0.3).entries, -f.derivative_at(0.7).entries)


class TestSpecsAndSerialization:
    def test_roundtrip_pairs(self, rng):
        a = random_hermitian_entries(3, rng)
        assert np.allclose(matrix_from_pairs(matrix_to_pairs(a)), a)

    def test_family_from_spec_kinds(self):
        specs = [
            FamilySpec("constant", {"matrix_diagonal": [-1.0, 1.0], "horizon": 2.0}),
            FamilySpec("linear", {"a0_diagonal": [-0.5], "b_diagonal": [1.0]}),
            FamilySpec("diagonal-path", {"start": [-1.0], "end": [1.0]}),
            FamilySpec("swap-block", {"lambda1": -1.0, "lambda2": 1.0}),
            FamilySpec("counterexample", {"m": 2}),
        ]
        dims = [2, 1, 1, 2, 4]
        for spec, dim in zip(specs, dims):
            fam = family_from_spec(spec)
            assert fam.dim == dim

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            FamilySpec("mystery", {})

    def test_missing_parameter(self):
        with pytest.raises(ConfigError, match="lambda1"):
            family_from_spec(FamilySpec("swap-block", {"lambda2": 1.0}))

    @pytest.mark.parametrize("ext", ["json", "csv"])
    def test_sample_series_roundtrip(self, tmp_path, rng, ext):
        times = [0.0, 0.5, 1.0]
        mats = [random_hermitian_entries(2, rng) for _ in times]
        path = tmp_path / f"series.{ext}"
        write_sample_series(path, times, mats)
        rt_times, rt_mats = read_sample_series(path)
        assert np.allclose(rt_times, times)
        for a, b in zip(mats, rt_mats):
            assert np.allclose(a, b)
        fam = family_from_spec(FamilySpec("custom-samples", {"path": str(path)}))
        assert fam.dim == 2
