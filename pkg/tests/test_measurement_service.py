"""
Test joint distributions, Bell functionals and the Monte Carlo CHSH run
"""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import chisquare

from src.config import config
from src.core.operators import DensityOperator, HermitianOperator, pauli, tensor_product
from src.errors import (
    AssignmentCapError,
    ClusterAmbiguityError,
    IncompatibleObservablesError,
    SamplingError,
)
from src.services.measurement_service import (
    BellFunctional,
    chsh_functional,
    evaluate_bell_functional,
    joint_distribution,
    mermin_functional,
    pairwise_implies_multiple_check,
    projectors,
    run_chsh_experiment,
    sample_joint,
)
from src.services import scan_service
from src.utils import presets, random_operators
from src.utils.rng import stream

SQRT2 = math.sqrt(2.0)


def _setting(optimal, i, j):
    a = (optimal.a1, optimal.a2)[i - 1].operator
    b = (optimal.b1, optimal.b2)[j - 1].operator
    return [projectors(a), projectors(b)]


def _pooled(observed, expected, floor=5.0):
    """Merge cells with fewer than floor expected counts into one."""
    keep = expected >= floor
    if keep.all():
        return observed, expected
    return (np.append(observed[keep], observed[~keep].sum()),
            np.append(expected[keep], expected[~keep].sum()))


class TestProjectors:

    def test_pauli_z(self):
        family = projectors(pauli('Z'))
        assert family.values == (1.0, -1.0)
        assert_allclose(family.projector(1.0), np.diag([1, 0]), atol=1e-12)

    def test_degenerate_outcome(self):
        family = projectors(tensor_product(pauli('Z'), pauli('I')))
        assert len(family.outcomes) == 2
        assert_allclose(np.trace(family.projector(-1.0)).real, 2.0)

    def test_ambiguous_cluster(self):
        with pytest.raises(ClusterAmbiguityError):
            projectors(HermitianOperator(np.diag([0.0, 1.5e-8])))


class TestJointDistribution:

    def test_non_commuting_pair(self):
        with pytest.raises(IncompatibleObservablesError):
            joint_distribution([projectors(pauli('Z')), projectors(pauli('X'))],
                               DensityOperator.maximally_mixed(2))

    def test_singlet_setting(self, optimal, singlet):
        jd = joint_distribution(_setting(optimal, 1, 1), singlet)
        assert_allclose(sum(jd.table.values()), 1.0, atol=1e-12)
        assert_allclose(jd.expectation(), -1 / SQRT2, atol=1e-12)
        both_up = sum(p for o, p in jd.table.items() if o[0] > 0 and o[1] > 0)
        assert_allclose(both_up, (1 - 1 / SQRT2) / 4, atol=1e-12)
        a_up = sum(p for o, p in jd.marginal((0,)).items() if o[0] > 0)
        assert_allclose(a_up, 0.5, atol=1e-12)

    def test_permutation_invariance(self):
        rng = stream(1, 'family', 0)
        family = [projectors(x) for x in random_operators.random_commuting_family(rng, 4, 3, (-1.0, 0.0, 1.0))]
        rho = random_operators.random_density(rng, 4)
        jd = joint_distribution(family, rho)
        reordered = joint_distribution([family[2], family[0], family[1]], rho)
        for outcome, p in jd.permuted((2, 0, 1)).table.items():
            assert abs(reordered.probability(outcome) - p) < 1e-9

    def test_pairwise_implies_multiple(self):
        for k in range(20):
            rng = stream(2, 'family', k)
            m = 2 + k % 3
            family = [projectors(x) for x in random_operators.random_commuting_family(rng, 4, m)]
            check = pairwise_implies_multiple_check(family, random_operators.random_density(rng, 4))
            assert check.passed, check.diagnostic

    def test_check_rejects_non_commuting(self):
        with pytest.raises(IncompatibleObservablesError):
            pairwise_implies_multiple_check([projectors(pauli('Z')), projectors(pauli('Y'))],
                                            DensityOperator.maximally_mixed(2))


    @pytest.mark.slow
    def test_pairwise_implies_multiple_on_200_families(self):
        for k in range(200):
            row = scan_service.jpd_family_item(31, k, dim=4, max_m=4)
            assert row['passed'], row['diagnostic']
            assert row['min_probability'] >= 0.0
            assert row['permutation_drift'] <= 1e-9


class TestBellFunctionals:

    def test_classical_bounds(self):
        pm = (-1.0, 1.0)
        assert chsh_functional().classical_bound([[pm, pm], [pm, pm]]) == 1.0
        assert mermin_functional().classical_bound([[pm, pm]] * 3) == 2.0

    def test_bad_coefficient_key(self):
        with pytest.raises(ValueError):
            BellFunctional(group_sizes=(2, 2), coefficients={(0, 2): 1.0})

    def test_assignment_cap(self):
        f = BellFunctional(group_sizes=(21,), coefficients={(0,): 1.0})
        with pytest.raises(AssignmentCapError):
            f.classical_bound([[(-1.0, 1.0)] * 21])

    def test_mermin_ghz(self):
        value = evaluate_bell_functional(mermin_functional(), presets.mermin_3(), presets.ghz_3())
        assert abs(value.value - 4.0) < 1e-9
        assert abs(value.classical_bound - 2.0) < 1e-9
        assert value.violated

    def test_chsh_on_incompatible_pairs(self, optimal, singlet):
        groups = [[projectors(optimal.a1.operator), projectors(optimal.a2.operator)],
                  [projectors(optimal.b1.operator), projectors(optimal.b2.operator)]]
        value = evaluate_bell_functional(chsh_functional(), groups, singlet)
        assert_allclose(value.value, -SQRT2, atol=1e-12)
        assert not value.violated

    def test_all_commuting_never_violates(self):
        for k in range(40):
            rng = stream(4, 'scenario', k)
            s = random_operators.random_all_commuting_scenario(rng, 4)
            groups = [[projectors(s.a1.operator), projectors(s.a2.operator)],
                      [projectors(s.b1.operator), projectors(s.b2.operator)]]
            value = evaluate_bell_functional(chsh_functional(), groups, random_operators.random_density(rng, 4))
            assert not value.violated


    @pytest.mark.slow
    def test_all_commuting_never_violates_on_200_scenarios(self):
        for k in range(200):
            row = scan_service.all_commuting_item(37, k, dim=4)
            assert row['value'] <= row['classical_bound'] + 1e-9
            assert row['bell_norm'] <= 1 + 1e-9


class TestSampling:

    def test_goodness_of_fit(self, optimal, singlet):
        jd = joint_distribution(_setting(optimal, 1, 2), singlet)
        n = 200000
        counts = sample_joint(jd, seed=7, n=n)
        observed = np.array([counts[o] for o in jd.outcomes()])
        expected = jd.probabilities() * n
        assert observed.sum() == n
        assert chisquare(observed, expected * n / expected.sum()).pvalue > 1e-4

    def test_independent_of_workers(self, optimal, singlet):
        jd = joint_distribution(_setting(optimal, 2, 1), singlet)
        n = 3 * config.RNG_CHUNK + 5
        assert sample_joint(jd, 9, n, workers=1) == sample_joint(jd, 9, n, workers=4)

    def test_seed_determinism(self, optimal, singlet):
        jd = joint_distribution(_setting(optimal, 2, 2), singlet)
        assert sample_joint(jd, 1, 1000) == sample_joint(jd, 1, 1000)
        assert sample_joint(jd, 1, 1000) != sample_joint(jd, 2, 1000)


    @pytest.mark.slow
    def test_goodness_of_fit_on_random_tables(self):
        n = 100000
        pvalues = []
        for k in range(100):
            rng = stream(29, 'family', k)
            family = [projectors(x) for x in random_operators.random_commuting_family(rng, 4, 2 + k % 2)]
            jd = joint_distribution(family, random_operators.random_density(rng, 4))
            counts = sample_joint(jd, seed=k, n=n)
            observed = np.array([counts[o] for o in jd.outcomes()], dtype=float)
            expected = jd.probabilities() / jd.probabilities().sum() * n
            observed, expected = _pooled(observed, expected)
            if len(observed) < 2:
                continue
            pvalues.append(chisquare(observed, expected).pvalue)
        assert len(pvalues) >= 50
        assert min(pvalues) > 1e-5
        assert np.mean(np.array(pvalues) < 0.05) <= 0.15


class TestExperiment:

    def test_optimal_run(self, optimal, singlet):
        run = run_chsh_experiment(optimal, singlet, 100000, seed=1)
        assert abs(run.chsh_estimate - run.quantum_value) <= 5 * run.chsh_stderr
        assert_allclose(run.quantum_value, -SQRT2, atol=1e-12)
        assert run.violation_observed
        assert not run.under_sampled
        assert_allclose(run.chsh_stderr, math.sqrt(0.5 / 100000), rtol=0.05)

    def test_deterministic(self, optimal, singlet):
        first = run_chsh_experiment(optimal, singlet, 5000, seed=3)
        second = run_chsh_experiment(optimal, singlet, 5000, seed=3, workers=2)
        assert first.counts == second.counts
        assert first.chsh_estimate == second.chsh_estimate

    def test_under_sampled(self, optimal, singlet):
        assert run_chsh_experiment(optimal, singlet, 10, seed=0).under_sampled

    def test_zero_rounds(self, optimal, singlet):
        with pytest.raises(SamplingError):
            run_chsh_experiment(optimal, singlet, 0, seed=0)

    def test_mixed_state(self, optimal):
        run = run_chsh_experiment(optimal, presets.state('maximally-mixed-4'), 20000, seed=5)
        assert abs(run.quantum_value) < 1e-12
        assert not run.violation_observed

    def test_commuting_pair_run(self, singlet):
        run = run_chsh_experiment(presets.commuting_a(), singlet, 20000, seed=2)
        assert abs(run.chsh_estimate) < 1.0
        assert not run.violation_observed

    def test_z_score_calibration(self, optimal, singlet):
        z = [run_chsh_experiment(optimal, singlet, 2000, seed=s).deviation_z for s in range(200)]
        assert 0.8 <= np.std(z) <= 1.25
