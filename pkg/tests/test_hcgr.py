import inspect

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal

from qtlnet.exceptions import InvalidInputError, InvalidModelError
from qtlnet.genetics import GeneticMap, simulate_f2_genotypes
from qtlnet.graph import Dag, topological_order
from qtlnet.hcgr import (
    HcgrModel, QtlEffect, concentration_matrix, fit_hcgr, genetic_means, joint_gaussian,
    linear_term, log_likelihood, qtl_design, simulate_phenotypes,
)
from qtlnet.simulation import benchmark_model


def random_model(rng, T=None, p_edge=0.5):
    T = T or int(rng.integers(1, 9))
    order = rng.permutation(T)
    edges = [(order[i], order[j]) for i in range(T) for j in range(i + 1, T) if rng.random() < p_edge]
    beta = np.zeros((T, T))
    for u, v in edges:
        beta[v, u] = rng.normal()
    return HcgrModel(Dag(T, edges), rng.normal(size=T), beta, rng.uniform(0.2, 3.0, T))


def matrix_oracle(model):
    T = model.n_traits
    IB = np.eye(T) - model.beta
    return IB.T @ np.diag(1 / model.sigma2) @ IB


def forward_mean(model, mu_star):
    y = np.zeros_like(mu_star)
    for t in topological_order(model.dag):
        y[t] = mu_star[t] + model.beta[t] @ y
    return y


def test_single_trait_omega():
    m = HcgrModel(Dag(1), [0.0], [[0.0]], [2.5])
    assert np.allclose(concentration_matrix(m), [[0.4]])


def test_two_trait_omega_by_hand():
    b, s1, s2 = 0.7, 1.3, 0.4
    m = HcgrModel(Dag(2, [(0, 1)]), [0, 0], [[0, 0], [b, 0]], [s1, s2])
    expected = [[1 / s1 + b**2 / s2, -b / s2], [-b / s2, 1 / s2]]
    assert np.allclose(concentration_matrix(m), expected, atol=1e-14)


def test_omega_matches_matrix_form_on_random_models():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        m = random_model(rng)
        omega = concentration_matrix(m)
        assert np.allclose(omega, matrix_oracle(m), atol=1e-10, rtol=0)
        assert np.allclose(omega, omega.T, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(omega) > 0)


def test_omega_takes_no_genotypes():
    assert list(inspect.signature(concentration_matrix).parameters) == ["model"]


def test_linear_term_no_edges():
    m = HcgrModel(Dag(3), [1.0, 2.0, 3.0], np.zeros((3, 3)), [1.0, 2.0, 4.0])
    assert np.allclose(linear_term(m, np.array([1.0, 2.0, 3.0])), [1.0, 1.0, 0.75])


def test_linear_term_two_traits_by_hand():
    b, s1, s2 = -1.2, 0.8, 1.7
    m = HcgrModel(Dag(2, [(0, 1)]), [0, 0], [[0, 0], [b, 0]], [s1, s2])
    mu = np.array([0.3, -2.0])
    assert np.allclose(linear_term(m, mu), [mu[0] / s1 - b * mu[1] / s2, mu[1] / s2])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_joint_mean_is_forward_substitution(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    mu = rng.normal(size=m.n_traits)
    gamma = linear_term(m, mu)
    assert np.allclose(np.linalg.solve(concentration_matrix(m), gamma), forward_mean(m, mu), atol=1e-8)


def test_loglik_standard_normal_value():
    m = HcgrModel(Dag(1), [0.0], [[0.0]], [1.0])
    ll = log_likelihood(m, np.zeros((2, 1)), {("x", 0.0): np.zeros(2)})
    assert ll == pytest.approx(-1.837877, abs=1e-6)


def _benchmark_data(n, seed, signal="strong"):
    model = benchmark_model(signal, seed)
    gmap = GeneticMap.equally_spaced(5, 100.0, 10)
    geno = simulate_f2_genotypes(gmap, n, seed)
    source = {(c, p): geno[:, gmap.marker_index(c, p)] for c, p in model.loci()}
    return model, source


def test_factorization_identity_per_individual():
    model, source = _benchmark_data(40, seed=3)
    Y = simulate_phenotypes(model, source, seed=4)
    jg = joint_gaussian(model, source)
    joint = jg.logpdf(Y)
    for i in range(Y.shape[0]):
        one = {k: v[i:i + 1] for k, v in source.items()}
        assert log_likelihood(model, Y[i:i + 1], one) == pytest.approx(joint[i], abs=1e-8)
        ref = multivariate_normal(jg.mean()[i], jg.covariance()).logpdf(Y[i])
        assert joint[i] == pytest.approx(ref, abs=1e-8)


def test_simulate_single_trait_moments():
    m = HcgrModel(Dag(1), [0.0], [[0.0]], [1.0])
    y = simulate_phenotypes(m, None, n=10000, seed=1)[:, 0]
    assert abs(y.mean()) < 0.05 and abs(y.var() - 1) < 0.1


def test_simulate_requires_n_without_source():
    m = HcgrModel(Dag(1), [0.0], [[0.0]], [1.0])
    with pytest.raises(InvalidInputError):
        simulate_phenotypes(m, None)


def test_simulated_covariance_matches_inverse_omega():
    model, source = _benchmark_data(50000, seed=8)
    Y = simulate_phenotypes(model, source, seed=9)
    resid = Y - joint_gaussian(model, source).mean()
    emp = np.cov(resid.T)
    sigma = np.linalg.inv(concentration_matrix(model))
    # sampling sd of a covariance entry is about sqrt((s_ii s_jj + s_ij^2) / n)
    se = np.sqrt((np.outer(np.diag(sigma), np.diag(sigma)) + sigma**2) / Y.shape[0])
    assert np.all(np.abs(emp - sigma) < 5 * se)


def test_zero_beta_independent_given_genotypes():
    model, source = _benchmark_data(20000, seed=12)
    flat = HcgrModel(model.dag, model.mean, np.zeros((5, 5)), model.sigma2, model.qtls)
    Y = simulate_phenotypes(flat, source, seed=13)
    keys = np.stack(list(source.values()), axis=1)
    _, cls = np.unique(keys, axis=0, return_inverse=True)
    cls = cls.ravel()
    resid = Y.copy()
    for c in np.unique(cls):
        resid[cls == c] -= resid[cls == c].mean(axis=0)
    r = np.corrcoef(resid.T)
    assert np.all(np.abs(r[np.triu_indices(5, 1)]) < 0.03)


def test_conditional_covariance_homogeneous_across_classes():
    model, source = _benchmark_data(40000, seed=5)
    Y = simulate_phenotypes(model, source, seed=6)
    q1 = next(iter(source.values()))
    sigma = np.linalg.inv(concentration_matrix(model))
    mu = joint_gaussian(model, source).mean()
    covs = [np.cov((Y - mu)[q1 == g].T) for g in (0, 1, 2)]
    scale = np.sqrt(np.outer(np.diag(sigma), np.diag(sigma)))
    for c in covs:
        assert np.max(np.abs(c - sigma) / scale) < 0.06


def test_fit_never_worse_with_extra_edge():
    rng = np.random.default_rng(0)
    for seed in range(10):
        m = random_model(np.random.default_rng(seed), T=4)
        Y = simulate_phenotypes(m, None, n=200, seed=seed)
        g = Dag(4)
        ll0 = log_likelihood(fit_hcgr(g, Y, {}), Y, {"": np.zeros(200)})
        for u, v in rng.permutation([(0, 1), (1, 2), (2, 3), (0, 3)]):
            try:
                g = g.add_edge(int(u), int(v))
            except Exception:
                continue
            ll1 = log_likelihood(fit_hcgr(g, Y, {}), Y, {"": np.zeros(200)})
            assert ll1 >= ll0 - 1e-9
            ll0 = ll1


def _ols_se(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    s2 = r @ r / (len(y) - X.shape[1])
    return coef, np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))


def test_simulate_fit_round_trip_coverage():
    hits = total = 0
    for rep in range(40):
        model, source = _benchmark_data(2000, seed=100 + rep)
        Y = simulate_phenotypes(model, source, seed=rep)
        loci = [[q.locus for q in per] for per in model.qtls]
        fit = fit_hcgr(model.dag, Y, source, loci)
        for t in range(5):
            pa = sorted(model.dag.parents(t))
            G = qtl_design([(source[l].astype(float), (source[l] == 1).astype(float)) for l in loci[t]])
            X = np.column_stack([np.ones(2000)] + [Y[:, v] for v in pa] + ([G] if G.size else []))
            coef, se = _ols_se(X, Y[:, t])
            truth = [model.mean[t]] + [model.beta[t, v] for v in pa]
            for q in model.qtls[t]:
                truth += [q.additive, q.dominance]
            assert np.allclose(coef[1:1 + len(pa)], [fit.beta[t, v] for v in pa])
            ok = np.abs(coef - truth) <= 3 * se
            hits += int(ok.sum())
            total += ok.size
    assert hits / total >= 0.99


def test_model_validation():
    with pytest.raises(InvalidModelError):
        HcgrModel(Dag(1), [0.0], [[0.0]], [0.0])
    with pytest.raises(InvalidModelError):
        HcgrModel(Dag(2), [0, 0], [[0, 0], [1, 0]], [1, 1])
    with pytest.raises(InvalidModelError):
        HcgrModel(Dag(2), [0], np.zeros((2, 2)), [1, 1])


def test_json_round_trip():
    model = benchmark_model("weak", seed=3)
    back = HcgrModel.from_json(model.to_json())
    assert back.dag == model.dag
    assert np.array_equal(back.beta, model.beta)
    assert back.qtls == model.qtls
    assert back.trait_names == model.trait_names


def test_qtl_design_interactions():
    a, d = np.array([0.0, 1, 2]), np.array([0.0, 1, 0])
    x = np.array([1.0, 2, 3])
    G = qtl_design([(a, d)], x, interactions=True)
    assert np.array_equal(G, np.column_stack([a, d, x * a, x * d]))


def test_genetic_means_add_effects():
    m = HcgrModel(Dag(1), [1.0], [[0.0]], [1.0], ((QtlEffect("1", 0.0, 0.5, 0.25),),))
    g = np.array([0, 1, 2])
    mu = genetic_means(m, {("1", 0.0): g})
    assert np.allclose(mu[:, 0], [1.0, 1.75, 2.0])
