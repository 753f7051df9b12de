"""Constructive Lyapunov solver: witnesses, purification, attainment."""

from dataclasses import asdict
from fractions import Fraction

import numpy as np
import pytest

from ovmkit import errors, opcore
from ovmkit.lyapunov import (
    attain,
    attain_to_json,
    brute_force_range,
    convex_combine,
    convexity_certificate,
    coordinate_matrix,
    fractional_from_intervals,
    joint_attain,
    kernel_witness,
    purify,
    realize_intervals,
)
from ovmkit.models import (
    lebesgue_identity,
    random_povm,
    rng_from_seed,
    single_atom_measure,
    singular_blocks,
    uhl_model,
)
from ovmkit.ovm import (
    FractionalSet,
    MeasurableSet,
    SampleSpace,
    evaluate,
    evaluate_fractional,
    grid_ovm,
)

RNG = rng_from_seed(717273)


def scalar_grid(masses, **kw):
    arr = np.asarray(masses, dtype=complex)[:, None, None]
    return grid_ovm(SampleSpace.uniform(len(arr), **kw), arr)


def random_set(space, rng):
    return MeasurableSet(
        tuple(bool(b) for b in rng.integers(0, 2, space.n_cells)),
        tuple(bool(b) for b in rng.integers(0, 2, space.n_atoms)),
    )


def rational_nullspace_dim(columns):
    """Exact null-space dimension by Gaussian elimination over Fractions."""
    rows = [list(row) for row in zip(*columns)]  # transpose: rows of the matrix
    rows = [[Fraction(x).limit_denominator(10**12) for x in row] for row in rows]
    n_cols = len(columns)
    rank = 0
    for col in range(n_cols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        lead = rows[rank][col]
        rows[rank] = [x / lead for x in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return n_cols - rank


class TestKernelWitness:
    def test_two_equal_cells(self):
        nu = scalar_grid([1.0, 1.0])
        w = kernel_witness(nu, [0, 1])
        assert np.allclose(w.coefficients, [1.0, -1.0])
        assert w.support == (0, 1)

    def test_cardinality_forces_dependence(self):
        # Any support larger than d^2 must carry a kernel.
        nu = random_povm(2, 12, RNG)
        for size in (5, 8, 12):
            support = sorted(RNG.choice(12, size=size, replace=False))
            w = kernel_witness(nu, support)
            assert w is not None
            drift = np.tensordot(w.coefficients, nu.cell_masses, axes=1)
            assert opcore.op_norm(drift) <= 1e-10 * max(1.0, opcore.op_norm(nu.total_mass()))
            assert np.abs(w.coefficients).max() == pytest.approx(1.0)

    def test_indicator_model_has_no_kernel(self):
        # Exact-rational oracle: the coordinate columns of the diagonal
        # unit masses have full column rank, so no support admits one.
        nu = uhl_model(6)
        for idx in range(1, 1 << 6):
            support = [k for k in range(6) if idx >> k & 1]
            cols = [opcore.herm_coords(nu.cell_masses[k]) for k in support]
            assert rational_nullspace_dim(cols) == 0
            assert kernel_witness(nu, support) is None

    def test_sign_convention(self):
        nu = scalar_grid([0.5, 0.25, 0.25])
        w = kernel_witness(nu, [0, 1, 2])
        lead = next(c for c in w.coefficients if abs(c) > 1e-12)
        assert lead > 0

    def test_empty_support_rejected(self):
        with pytest.raises(errors.InvalidInput):
            kernel_witness(scalar_grid([1.0]), [])


class TestPurify:
    def test_quarter_masses_frozen_output(self):
        nu = scalar_grid([0.25, 0.25, 0.25, 0.25])
        result = purify(nu, FractionalSet((0.5, 0.5, 0.5, 0.5)))
        assert result.h_final.cell_fractions == (1.0, 1.0, 0.0, 0.0)
        assert result.fractional_indices == ()
        assert result.target_residual <= 1e-14
        assert evaluate_fractional(nu, result.h_final)[0, 0].real == pytest.approx(0.5)

    def test_indicator_input_untouched(self):
        nu = random_povm(2, 8, RNG)
        h = FractionalSet.from_measurable(random_set(nu.space, RNG))
        result = purify(nu, h)
        assert result.iterations == 0
        assert result.h_final.cell_fractions == h.cell_fractions

    def test_indicator_model_stalls_fractional(self):
        # No kernel ever exists, so the half-set survives purification
        # with every cell fractional and no obstruction raised.
        nu = uhl_model(5)
        result = purify(nu, FractionalSet((0.5,) * 5))
        assert result.h_final.cell_fractions == (0.5,) * 5
        assert len(result.fractional_indices) == 5
        assert result.iterations == 0

    def test_conservation_and_fractional_bound(self):
        for trial in range(30):
            rng = rng_from_seed(900 + trial)
            d = int(rng.integers(1, 4))
            m = int(rng.integers(d * d + 1, 40))
            nu = random_povm(d, m, rng)
            h0 = FractionalSet(tuple(rng.random(m)))
            before = evaluate_fractional(nu, h0)
            result = purify(nu, h0)
            after = evaluate_fractional(nu, result.h_final)
            scale = opcore.op_norm(nu.total_mass())
            assert opcore.op_norm(after - before) <= max(result.iterations, 1) * 1e-12 * scale
            assert len(result.fractional_indices) <= d * d
            assert result.iterations <= m

    def test_zero_mass_fraction_dropped(self):
        masses = np.array([[[0.5]], [[0.0]], [[0.5]]], dtype=complex)
        nu = grid_ovm(SampleSpace.uniform(3), masses)
        result = purify(nu, FractionalSet((1.0, 0.37, 0.0)))
        assert result.h_final.cell_fractions[1] == 0.0

    def test_mixed_divisibility_obstruction(self):
        # Two indivisible cells with equal masses admit a kernel that
        # cannot move without splitting one of them.
        space = SampleSpace(0.0, 1.0, (0.0, 0.5, 1.0), divisible=(False, False))
        nu = grid_ovm(space, np.array([[[1.0]], [[1.0]]], dtype=complex))
        with pytest.raises(errors.AtomicObstruction) as err:
            purify(nu, FractionalSet((0.5, 0.5)))
        assert err.value.cells == (0, 1)


class TestRealize:
    def test_merges_adjacent_cells(self):
        nu = lebesgue_identity(4)
        result = realize_intervals(nu, FractionalSet((1.0, 1.0, 0.0, 0.0)))
        assert result.intervals == ((0.0, 0.5),)
        assert result.interval_count == 1

    def test_leftmost_convention(self):
        nu = lebesgue_identity(4)
        result = realize_intervals(nu, FractionalSet((0.5, 0.0, 0.0, 0.0)))
        assert result.intervals == ((0.0, 0.125),)

    def test_fraction_after_full_cell_merges(self):
        nu = lebesgue_identity(4)
        result = realize_intervals(nu, FractionalSet((1.0, 0.5, 0.0, 1.0)))
        assert result.intervals == ((0.0, 0.375), (0.75, 1.0))

    def test_atomic_obstruction(self):
        nu = uhl_model(3)
        with pytest.raises(errors.AtomicObstruction):
            realize_intervals(nu, FractionalSet((0.5, 0.0, 0.0)))

    def test_exactness_of_realization(self):
        for trial in range(20):
            rng = rng_from_seed(1000 + trial)
            nu = random_povm(2, int(rng.integers(5, 30)), rng)
            h = purify(nu, FractionalSet(tuple(rng.random(nu.space.n_cells)))).h_final
            result = realize_intervals(nu, h)
            back = fractional_from_intervals(nu.space, result.intervals)
            value = evaluate_fractional(nu, back)
            scale = max(1.0, opcore.op_norm(nu.total_mass()))
            assert opcore.op_norm(value - result.achieved) <= 1e-12 * scale

    def test_interval_count_bound_on_purified_instances(self):
        # 200 random purified instances stay below m + d^2 intervals.
        for trial in range(200):
            rng = rng_from_seed(2000 + trial)
            d = int(rng.integers(1, 4))
            m = int(rng.integers(2, 25))
            nu = random_povm(d, m, rng)
            h = purify(nu, FractionalSet(tuple(rng.random(m)))).h_final
            result = realize_intervals(nu, h)
            assert result.interval_count <= m + d * d


class TestConvexCombine:
    def test_t_zero_returns_second_set(self):
        nu = random_povm(2, 10, RNG)
        e1, e2 = random_set(nu.space, RNG), random_set(nu.space, RNG)
        result = convex_combine(nu, e1, e2, 0.0)
        assert result.residual == 0.0
        assert opcore.op_norm(result.achieved - evaluate(nu, e2)) == 0.0

    def test_half_mix_of_everything_and_nothing(self):
        nu = lebesgue_identity(8, 2)
        result = convex_combine(nu, MeasurableSet.full(nu.space),
                                MeasurableSet.empty(nu.space), 0.5)
        assert opcore.op_norm(result.achieved - np.eye(2) / 2) <= 1e-12
        assert result.intervals == ((0.0, 0.5),)

    def test_random_mixes(self):
        nu = random_povm(2, 40, rng_from_seed(5))
        rng = rng_from_seed(6)
        for _ in range(20):
            e1, e2 = random_set(nu.space, rng), random_set(nu.space, rng)
            t = float(rng.random())
            target = t * evaluate(nu, e1) + (1 - t) * evaluate(nu, e2)
            result = convex_combine(nu, e1, e2, t)
            assert opcore.op_norm(result.achieved - target) <= 1e-9
            assert result.residual <= 1e-9
            assert result.interval_count <= 44

    def test_differing_atoms_obstruct(self):
        nu = single_atom_measure()
        e1 = MeasurableSet((False,), (True,))
        e2 = MeasurableSet((False,), (False,))
        with pytest.raises(errors.AtomicObstruction):
            convex_combine(nu, e1, e2, 0.5)

    def test_agreeing_atoms_pass_through(self):
        space = SampleSpace.uniform(4, atom_sites=(0.5,))
        masses = np.full((4, 1, 1), 0.2, dtype=complex)
        nu = grid_ovm(space, masses, atom_masses=np.array([[[0.2]]], dtype=complex))
        e1 = MeasurableSet((True, True, False, False), (True,))
        e2 = MeasurableSet((False, False, True, False), (True,))
        result = convex_combine(nu, e1, e2, 0.25)
        assert result.residual <= 1e-12
        assert result.atom_indices == (0,)


class TestAttain:
    def test_half_total(self):
        nu = random_povm(2, 24, RNG)
        result = attain(nu, nu.total_mass() / 2)
        assert result.residual <= 1e-9

    def test_full_total_is_whole_space(self):
        nu = lebesgue_identity(6, 2)
        result = attain(nu, nu.total_mass())
        assert result.intervals == ((0.0, 1.0),)
        assert result.residual <= 1e-12

    def test_double_total_not_in_hull(self):
        nu = lebesgue_identity(6, 2)
        with pytest.raises(errors.TargetNotInHull):
            attain(nu, 2 * nu.total_mass())

    def test_feasible_random_targets(self):
        nu = random_povm(3, 30, rng_from_seed(8))
        rng = rng_from_seed(9)
        for _ in range(10):
            h = rng.random(30)
            target = np.tensordot(h, nu.cell_masses, axes=1)
            result = attain(nu, target)
            assert result.residual <= 1e-9 * max(1.0, opcore.op_norm(target))
            assert result.fractional_count <= 9
            box = opcore.OperatorInterval(np.zeros((3, 3)), nu.total_mass())
            assert box.contains(result.achieved, 1e-9)

    def test_atomic_measure_rejected(self):
        with pytest.raises(errors.AtomicObstruction):
            attain(single_atom_measure(), np.array([[0.5]]))
        with pytest.raises(errors.AtomicObstruction):
            attain(uhl_model(4), np.eye(4) / 2)


class TestJointAttain:
    def test_three_scalar_halves(self):
        mus = singular_blocks(3)
        targets = [np.array([[0.5]])] * 3
        result = joint_attain(mus, targets)
        assert result.residual <= 1e-9

    def test_disjoint_support_tuple(self):
        mus = singular_blocks(4)
        lam = [0.1, 0.5, 0.9, 0.3]
        result = joint_attain(mus, [np.array([[x]]) for x in lam])
        assert result.residual <= 1e-10
        assert np.allclose(result.achieved.diagonal().real, lam, atol=1e-10)

    def test_single_measure_classical_case(self):
        mu = scalar_grid([0.25, 0.25, 0.25, 0.25])
        result = joint_attain([mu], [np.array([[1.0 / 3.0]])])
        assert result.residual <= 1e-10

    def test_mismatched_lengths(self):
        with pytest.raises(errors.InvalidInput):
            joint_attain(singular_blocks(2), [np.array([[0.5]])])


class TestBruteForce:
    def test_single_atom_range(self):
        nu = single_atom_measure()
        values = sorted(float(v[0, 0].real) for _, v in brute_force_range(nu))
        assert values == [0.0, 0.0, 1.0, 1.0]  # cell carries nothing
        assert set(values) == {0.0, 1.0}

    def test_quarter_masses_subset_sums(self):
        nu = scalar_grid([0.25, 0.25, 0.25, 0.25])
        values = sorted({float(v[0, 0].real) for _, v in brute_force_range(nu)})
        assert values == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_indicator_model_midpoint_gap(self):
        nu = uhl_model(12)
        half = nu.total_mass() / 2
        gap = min(opcore.op_norm(v - half) for _, v in brute_force_range(nu))
        assert gap == pytest.approx(0.5, abs=1e-12)

    def test_masks_match_values(self):
        nu = random_povm(2, 5, RNG)
        for e, v in brute_force_range(nu)[:16]:
            assert opcore.op_norm(v - evaluate(nu, e)) <= 1e-13

    def test_size_limit(self):
        with pytest.raises(errors.SizeLimit):
            brute_force_range(lebesgue_identity(23))


class TestCertificate:
    def test_nonatomic_full_pass(self):
        nu = random_povm(2, 40, rng_from_seed(7))
        report = convexity_certificate(nu, 100, 7)
        assert report.failures == ()
        assert report.max_residual <= 1e-9
        assert report.max_interval_count <= 44

    def test_single_atom_all_fail(self):
        report = convexity_certificate(single_atom_measure(), 100, 3)
        assert len(report.failures) == 100
        assert all("AtomicObstruction" in f.reason for f in report.failures)

    def test_indicator_model_obstructed(self):
        report = convexity_certificate(uhl_model(6), 25, 11)
        assert len(report.failures) > 0

    def test_determinism_bitwise(self):
        nu = random_povm(2, 12, rng_from_seed(21))
        a = convexity_certificate(nu, 30, 99)
        b = convexity_certificate(nu, 30, 99)
        assert a.max_residual == b.max_residual
        assert a.max_interval_count == b.max_interval_count
        assert tuple(asdict(f) for f in a.failures) == tuple(asdict(f) for f in b.failures)


class TestOracleAgreement:
    def test_achieved_point_witnessed_in_hull(self):
        nu = random_povm(2, 12, rng_from_seed(31))
        rng = rng_from_seed(32)
        for _ in range(10):
            e1, e2 = random_set(nu.space, rng), random_set(nu.space, rng)
            t = float(rng.random())
            result = convex_combine(nu, e1, e2, t)
            hull_point = evaluate_fractional(nu, FractionalSet(
                tuple(t * float(x) + (1 - t) * float(y)
                      for x, y in zip(e1.cell_mask, e2.cell_mask))))
            assert opcore.op_norm(result.achieved - hull_point) <= 1e-9

    def test_scalar_case_matches_subset_interpolation(self):
        nu = scalar_grid(RNG.uniform(0.05, 0.3, 8))
        rng = rng_from_seed(33)
        for _ in range(10):
            e1, e2 = random_set(nu.space, rng), random_set(nu.space, rng)
            t = float(rng.random())
            expected = (t * evaluate(nu, e1) + (1 - t) * evaluate(nu, e2))[0, 0].real
            result = convex_combine(nu, e1, e2, t)
            assert result.achieved[0, 0].real == pytest.approx(expected, abs=1e-10)


class TestAttainJson:
    def test_schema(self):
        nu = lebesgue_identity(4, 2)
        result = attain(nu, nu.total_mass() / 2)
        obj = attain_to_json(result)
        assert set(obj) == {"intervals", "atoms", "achieved", "residual",
                            "interval_count", "iterations"}
        assert obj["interval_count"] == len(obj["intervals"])


class TestCoordinateMatrix:
    def test_shape_and_content(self):
        nu = random_povm(2, 6, RNG)
        mat = coordinate_matrix(nu, [1, 4])
        assert mat.shape == (4, 2)
        assert np.allclose(mat[:, 1], opcore.herm_coords(nu.cell_masses[4]))
