import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmediate.errors import IngestionError, InputError, PairingError, SingularDesignError
from qmediate.learner.evaluate import evaluate_arm
from qmediate.learner.model import TrainedModel
from qmediate.mediation.paired import PairedObservations
from qmediate.mediation.sem import (
    build_design, cluster_robust_variance, consistency_error, decompose, estimate_alpha, fit_outcome_model,
    pivoted_lstsq,
)
from qmediate.mediation.synthetic import generate_pairs
from qmediate.simulator import CircuitSpec

import oracles


def pairs_from(M0, Y0, M1, Y1):
    return PairedObservations(np.arange(len(Y0)), M0, Y0, M1, Y1)


def noiseless(**kw):
    kw.setdefault("noise_sd", 0.0)
    kw.setdefault("shift_sd", 0.0)
    return generate_pairs(**kw)


def simulated_config(rng, n=30):
    """Pairs from two random circuits on random inputs (real pure-state mediators)."""
    topo = ["deep", "full", "linear", "ring"][rng.integers(4)]
    arms = []
    X = rng.uniform(-2, 2, (n, 4))
    y = rng.integers(0, 2, n)
    for t, d in ((0, 1), (1, 3)):
        spec = CircuitSpec(topo, 4, d)
        model = TrainedModel(spec, rng.uniform(-math.pi, math.pi, spec.shape), 0, arm=t)
        arms.append(evaluate_arm(model, X, y))
    return PairedObservations.from_arms(*arms)


# alpha -----------------------------------------------------------------------------


def test_alpha_zero_when_arms_identical():
    M = np.random.default_rng(0).random((5, 4))
    assert np.array_equal(estimate_alpha(pairs_from(M, np.zeros(5), M, np.ones(5))), np.zeros(4))


def test_alpha_is_mean_difference():
    M0 = np.zeros((2, 4))
    M1 = np.zeros((2, 4))
    M1[:, 0] = [0.2, 0.4]
    assert estimate_alpha(pairs_from(M0, np.zeros(2), M1, np.zeros(2)))[0] == pytest.approx(0.3)


def test_alpha_noiseless_recovery():
    pairs, truth = noiseless(alpha_s=0.13, alpha_gamma=-0.07)
    assert np.allclose(estimate_alpha(pairs), truth.alpha, atol=1e-12)


def test_alpha_needs_two_pairs():
    with pytest.raises(InputError):
        estimate_alpha(pairs_from(np.zeros((1, 4)), [0], np.zeros((1, 4)), [0]))


# outcome model ---------------------------------------------------------------------


def test_noiseless_outcome_recovery():
    pairs, truth = noiseless(tau0=0.4, tau=0.03, beta=(0.05, -0.2, 0.0, 0.0), shift_sd=0.05)
    fit = fit_outcome_model(pairs)
    assert fit.tau0 == pytest.approx(truth.tau0, abs=1e-8)
    assert fit.tau == pytest.approx(truth.tau, abs=1e-8)
    assert np.allclose(fit.beta, truth.composite, atol=1e-8)


def test_composite_coefficients_for_collinear_mediators():
    # planted on all four columns; only the composites are identified
    pairs, truth = noiseless(beta=(0.05, 0.1, 0.03, -0.02), shift_sd=0.05)
    fit = fit_outcome_model(pairs)
    assert np.allclose(fit.beta, [0.05 - 0.04, 0.1 - 0.03, 0, 0], atol=1e-8)
    assert fit.tau0 == pytest.approx(truth.tau0, abs=1e-8)


def test_constant_outcome():
    pairs, _ = noiseless(shift_sd=0.05)
    pairs = pairs_from(pairs.M0, np.full(len(pairs), 0.7), pairs.M1, np.full(len(pairs), 0.7))
    fit = fit_outcome_model(pairs)
    assert fit.tau == pytest.approx(0, abs=1e-12)
    assert np.allclose(fit.beta, 0, atol=1e-12)
    assert fit.tau0 == pytest.approx(0.7)


def test_full_basis_pseudo_solution():
    pairs, truth = noiseless(beta=(0.05, 0.1, 0.0, 0.0), shift_sd=0.05)
    full = fit_outcome_model(pairs, "full")
    reduced = fit_outcome_model(pairs, "reduced")
    X = full.design.X
    assert X.shape[1] == 6
    # minimum-norm least squares, checked against an SVD pseudo-inverse
    assert np.allclose(full.coef, np.linalg.pinv(X, rcond=1e-10) @ full.design.y, atol=1e-10)
    assert full.tau == pytest.approx(reduced.tau, abs=1e-8)
    alpha = estimate_alpha(pairs)
    assert full.beta @ alpha == pytest.approx(reduced.beta @ alpha, abs=1e-10)
    assert reduced.beta @ alpha == pytest.approx(truth.composite @ alpha, abs=1e-10)


def test_ols_matches_explicit_normal_equations():
    rng = np.random.default_rng(3)
    for _ in range(20):
        pairs, _ = generate_pairs(n=int(rng.integers(15, 80)), seed=int(rng.integers(1 << 30)))
        fit = fit_outcome_model(pairs)
        X, y = fit.design.X, fit.design.y
        brute = np.linalg.inv(X.T @ X) @ (X.T @ y)
        assert np.max(np.abs(fit.coef - brute)) < 1e-8


def test_constant_mediators_dropped_with_zero_coefficient():
    pairs, _ = generate_pairs(n=30, seed=1)
    M0 = pairs.M0.copy()
    M1 = pairs.M1.copy()
    M0[:] = [0, 1, 0, 0]
    M1[:] = [0, 1, 0, 0]
    p = pairs_from(M0, pairs.Y0, M1, pairs.Y1)
    for basis in ("reduced", "full"):
        fit = fit_outcome_model(p, basis)
        assert fit.design.columns == ("const", "t")
        assert np.array_equal(fit.beta, np.zeros(4))
    d = decompose(p)
    assert d.nie == 0.0
    assert d.tau == pytest.approx(d.ate_empirical, abs=1e-12)


def test_singular_design_names_columns():
    pairs, _ = generate_pairs(n=20, seed=2)
    n = len(pairs)
    M0 = pairs.M0.copy()
    M1 = pairs.M1.copy()
    M0[:, 0] = 0.3  # S_A tracks the arm indicator exactly
    M1[:, 0] = 0.8
    with pytest.raises(SingularDesignError) as info:
        fit_outcome_model(pairs_from(M0, pairs.Y0, M1, pairs.Y1))
    assert info.value.columns
    assert set(info.value.columns) <= {"const", "t", "S_A", "gamma_A"}
    assert n == 20


def test_pivoted_lstsq_default_names():
    X = np.column_stack([np.ones(4), np.ones(4)])
    with pytest.raises(SingularDesignError, match="x"):
        pivoted_lstsq(X, np.zeros(4))


def test_unknown_basis():
    pairs, _ = generate_pairs(n=20)
    with pytest.raises(InputError):
        build_design(pairs, "other")


# decomposition ---------------------------------------------------------------------


def test_decompose_worked_example():
    pairs, truth = noiseless(tau=0.02, alpha_s=0.5, alpha_gamma=0.0, beta=(0.01, 0, 0, 0))
    assert np.allclose(truth.alpha, [0.5, 0, 0, 1.0])
    est = decompose(pairs)
    assert est.tau == pytest.approx(0.02, abs=1e-10)
    assert est.nie == pytest.approx(0.005, abs=1e-10)
    assert est.ate_empirical == pytest.approx(0.025, abs=1e-10)
    assert est.nde == est.tau


def test_identical_mediators_give_zero_indirect_effect():
    pairs, _ = generate_pairs(n=40, seed=4)
    p = pairs_from(pairs.M0, pairs.Y0, pairs.M0, pairs.Y1)
    est = decompose(p)
    assert est.nie == 0.0
    assert est.tau == pytest.approx(est.ate_empirical, abs=1e-12)


def test_consistency_error_cases():
    pairs, _ = noiseless(beta=(0.3, 0.0, 0.0, 0.0), shift_sd=0.05)
    est = decompose(pairs)
    assert est.eps_rel < 1e-12
    est.beta = est.beta * 5  # corrupt the outcome coefficients
    assert consistency_error(est) > 0.05
    # zero ATE with a tiny mismatch stays finite thanks to the guard
    est.ate_empirical, est.tau, est.beta = 0.0, 1e-13, np.zeros(4)
    assert math.isfinite(consistency_error(est))
    assert consistency_error(est) == pytest.approx(0.1)


def test_cluster_robust_significance_fields():
    pairs, truth = generate_pairs(n=200, tau=0.05, seed=5)
    est = decompose(pairs)
    assert set(est.se) == set(est.fit.columns)
    assert est.pvalues["t"] < 1e-6
    assert all(0 <= v <= 1 for v in est.pvalues.values())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-0.1, 0.1), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_decomposition_identity(seed, tau, b_s, b_g):
    # pair-shared errors cancel in the contrast, so the identity is exact
    pairs, truth = generate_pairs(n=40, tau=tau, beta=(b_s, b_g, 0, 0), noise="pair", seed=seed)
    est = decompose(pairs)
    assert abs(est.ate_empirical - (est.tau + est.beta @ est.alpha)) < 1e-10


def test_identity_holds_on_row_noise_too():
    for seed in range(20):
        pairs, _ = generate_pairs(n=60, seed=seed)
        est = decompose(pairs)
        assert abs(est.ate_empirical - (est.tau + est.beta @ est.alpha)) < 1e-10


def test_basis_invariance_on_simulated_configurations():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        pairs = simulated_config(rng)
        red = decompose(pairs, "reduced")
        full = decompose(pairs, "full")
        worst = max(worst, abs(red.nie - full.nie), abs(red.tau - full.tau))
    assert worst < 1e-8


# cluster-robust variance -----------------------------------------------------------


def test_singleton_clusters_match_hc0():
    rng = np.random.default_rng(6)
    X = np.column_stack([np.ones(50), rng.normal(size=50), rng.normal(size=50)])
    u = rng.normal(size=50)
    assert np.allclose(cluster_robust_variance(X, u, np.arange(50)), oracles.hc0(X, u), atol=1e-14)


def test_zero_residuals_zero_covariance():
    X = np.column_stack([np.ones(6), np.arange(6.0)])
    assert np.array_equal(cluster_robust_variance(X, np.zeros(6), [0, 0, 1, 1, 2, 2]), np.zeros((2, 2)))


def test_three_cluster_hand_example():
    # X'X = [[6,3],[3,3]]; cluster scores (0,-1), (2,0), (1,1); meat [[5,1],[1,2]]
    X = np.array([[1, 0], [1, 1], [1, 0], [1, 1], [1, 0], [1, 1]], dtype=float)
    u = np.array([1, -1, 2, 0, 0, 1], dtype=float)
    cov = cluster_robust_variance(X, u, [0, 0, 1, 1, 2, 2])
    assert np.allclose(cov, [[5 / 9, -2 / 3], [-2 / 3, 1]], atol=1e-14)


def test_cluster_variance_singular():
    with pytest.raises(SingularDesignError):
        cluster_robust_variance(np.ones((4, 2)), np.ones(4), [0, 1, 2, 3])


# paired observations ---------------------------------------------------------------


def test_stacked_layout():
    pairs, _ = generate_pairs(n=5)
    t, M, Y, cl = pairs.stacked()
    assert t.tolist() == [0] * 5 + [1] * 5
    assert np.array_equal(M[5:], pairs.M1)
    assert cl.tolist() == list(range(5)) * 2


def test_paired_csv_round_trip(tmp_path):
    pairs, _ = generate_pairs(n=12, seed=3)
    path = tmp_path / "paired.csv"
    pairs.to_csv(path)
    back = PairedObservations.from_csv(path)
    for name in ("sample_id", "M0", "M1", "Y0", "Y1", "y_true"):
        assert np.array_equal(getattr(back, name), getattr(pairs, name))


def _write_rows(path, rows):
    header = "sample_id,t,S_A,gamma_A,L_A,I_AB,p,Y_dir,y_true\n"
    path.write_text(header + "".join(",".join(map(str, r)) + "\n" for r in rows))


def test_paired_csv_missing_arm(tmp_path):
    path = tmp_path / "p.csv"
    _write_rows(path, [(1, 0, 0, 1, 0, 0, 0.5, 0.5, 1), (1, 1, 0, 1, 0, 0, 0.5, 0.5, 1),
                       (2, 0, 0, 1, 0, 0, 0.5, 0.5, 1)])
    with pytest.raises(PairingError, match=r"missing arm t=1 for samples \[2\]"):
        PairedObservations.from_csv(path)


def test_paired_csv_duplicates_and_bad_rows(tmp_path):
    path = tmp_path / "p.csv"
    _write_rows(path, [(1, 0, 0, 1, 0, 0, 0.5, 0.5, 1), (1, 0, 0, 1, 0, 0, 0.5, 0.5, 1)])
    with pytest.raises(PairingError, match="twice"):
        PairedObservations.from_csv(path)
    _write_rows(path, [(1, 2, 0, 1, 0, 0, 0.5, 0.5, 1)])
    with pytest.raises(IngestionError, match="t must be"):
        PairedObservations.from_csv(path)
    _write_rows(path, [(1, 0, "x", 1, 0, 0, 0.5, 0.5, 1)])
    with pytest.raises(IngestionError, match="row 1"):
        PairedObservations.from_csv(path)
    path.write_text("sample_id,t\n1,0\n")
    with pytest.raises(IngestionError, match="missing columns"):
        PairedObservations.from_csv(path)


def test_from_arms_requires_matching_labels():
    rng = np.random.default_rng(0)
    pairs = simulated_config(rng, n=6)
    assert len(pairs) == 6
    spec = CircuitSpec("ring", 4, 1)
    X = rng.uniform(size=(4, 4))
    a0 = evaluate_arm(TrainedModel(spec, np.zeros(spec.shape), 0), X, [0, 1, 0, 1])
    a1 = evaluate_arm(TrainedModel(spec, np.zeros(spec.shape), 0, arm=1), X, [1, 1, 0, 1])
    with pytest.raises(PairingError):
        PairedObservations.from_arms(a0, a1)
    a1.sample_id = np.array([0, 1, 2, 9])
    with pytest.raises(PairingError, match="unpaired"):
        PairedObservations.from_arms(a0, a1)
