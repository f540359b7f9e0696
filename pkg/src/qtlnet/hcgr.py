"""Homogeneous conditional Gaussian regression (HCGR) phenotype model.

Each trait follows a linear structural equation

    y_t = mu_t + X_t theta_t + sum_{v in pa(t)} beta_tv y_v + e_t,   e_t ~ N(0, sigma2_t)

where ``X_t`` holds additive (number of B alleles) and dominance
(heterozygote indicator) codes for the trait's QTLs. Jointly, given the QTL
genotypes, ``y`` is multivariate normal with a concentration matrix that does
not depend on the genotypes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .exceptions import InvalidInputError, InvalidModelError
from .genetics import MISSING, F2Cross, GenoProbTable
from .graph import Dag, ExtendedGraph, Qtl, topological_order

LOG_2PI = math.log(2.0 * math.pi)


class QtlEffect(NamedTuple):
    chromosome: str
    position: float
    additive: float
    dominance: float = 0.0

    @property
    def locus(self) -> tuple[str, float]:
        return (self.chromosome, self.position)


@dataclass(frozen=True)
class HcgrModel:
    """Structural-equation parameters for ``T`` traits on a phenotype DAG.

    ``beta[t, v]`` is the effect of trait ``v`` on trait ``t`` and may be
    non-zero only when ``v -> t`` is an edge of ``dag``.
    """

    dag: Dag
    mean: np.ndarray
    beta: np.ndarray
    sigma2: np.ndarray
    qtls: tuple[tuple[QtlEffect, ...], ...] = ()
    covariate_effects: np.ndarray | None = None
    trait_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        T = self.dag.n_nodes
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        beta = np.asarray(self.beta, dtype=float)
        sigma2 = np.asarray(self.sigma2, dtype=float).reshape(-1)
        qtls = tuple(tuple(QtlEffect(*q) for q in per) for per in self.qtls) or ((),) * T
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "qtls", qtls)
        if mean.shape != (T,) or sigma2.shape != (T,) or beta.shape != (T, T) or len(qtls) != T:
            raise InvalidModelError(f"parameter shapes inconsistent with {T} traits")
        if not np.all(np.isfinite(beta)) or not np.all(np.isfinite(mean)):
            raise InvalidModelError("beta and mean must be finite")
        if np.any(~(sigma2 > 0)):
            raise InvalidModelError("residual variances must be > 0")
        off = np.ones((T, T), dtype=bool)
        for u, v in self.dag.edges:
            off[v, u] = False
        if np.any(beta[off] != 0):
            raise InvalidModelError("beta has entries for pairs that are not DAG edges")
        if self.covariate_effects is not None:
            ce = np.atleast_2d(np.asarray(self.covariate_effects, dtype=float))
            if ce.shape[0] != T:
                raise InvalidModelError("covariate_effects must have one row per trait")
            object.__setattr__(self, "covariate_effects", ce)
        if self.trait_names and len(self.trait_names) != T:
            raise InvalidModelError("one trait name per trait required")
        object.__setattr__(
            self, "trait_names", tuple(self.trait_names) or tuple(f"Y{t + 1}" for t in range(T))
        )

    @property
    def n_traits(self) -> int:
        return self.dag.n_nodes

    def loci(self) -> list[tuple[str, float]]:
        seen = []
        for per in self.qtls:
            for q in per:
                if q.locus not in seen:
                    seen.append(q.locus)
        return seen

    def extended_graph(self) -> ExtendedGraph:
        names = {}
        for t, per in enumerate(self.qtls):
            for q in per:
                names.setdefault(q.locus, Qtl(f"Q{len(names) + 1}", q.chromosome, q.position))
        return ExtendedGraph(
            self.dag, [(names[q.locus], t) for t, per in enumerate(self.qtls) for q in per]
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        T = self.n_traits
        return {
            "traits": list(self.trait_names),
            "edges": [[u, v] for u, v in sorted(self.dag.edges)],
            "mean": self.mean.tolist(),
            "sigma2": self.sigma2.tolist(),
            "beta": [
                {"from": u, "to": v, "value": float(self.beta[v, u])} for u, v in sorted(self.dag.edges)
            ],
            "qtls": [
                [
                    {"chromosome": q.chromosome, "position": q.position, "additive": q.additive,
                     "dominance": q.dominance}
                    for q in self.qtls[t]
                ]
                for t in range(T)
            ],
            "covariate_effects": (
                None if self.covariate_effects is None else self.covariate_effects.tolist()
            ),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> HcgrModel:
        T = len(d["mean"])
        dag = Dag(T, [tuple(e) for e in d["edges"]])
        beta = np.zeros((T, T))
        for b in d.get("beta", []):
            beta[b["to"], b["from"]] = b["value"]
        qtls = tuple(
            tuple(
                QtlEffect(str(q["chromosome"]), float(q["position"]), float(q["additive"]),
                          float(q.get("dominance", 0.0)))
                for q in per
            )
            for per in d.get("qtls", [[]] * T)
        )
        ce = d.get("covariate_effects")
        return cls(
            dag,
            np.array(d["mean"], dtype=float),
            beta,
            np.array(d["sigma2"], dtype=float),
            qtls,
            None if ce is None else np.array(ce, dtype=float),
            tuple(d.get("traits", ())),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> HcgrModel:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class JointGaussian:
    """``y_i ~ N(omega^{-1} gamma_i, omega^{-1})``; ``gamma`` is ``(n, T)``."""

    omega: np.ndarray
    gamma: np.ndarray

    def mean(self) -> np.ndarray:
        return np.linalg.solve(self.omega, self.gamma.T).T

    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.omega)

    def logpdf(self, y: np.ndarray) -> np.ndarray:
        """Per-individual multivariate normal log-density."""
        y = np.atleast_2d(y)
        T = self.omega.shape[0]
        resid = y - self.mean()
        sign, logdet = np.linalg.slogdet(self.omega)
        quad = np.einsum("ij,jk,ik->i", resid, self.omega, resid)
        return 0.5 * (logdet - T * LOG_2PI - quad)


# -- genotype codes -----------------------------------------------------------


def locus_codes(source, chromosome: str, position: float) -> tuple[np.ndarray, np.ndarray]:
    """Additive and dominance predictors at a locus.

    ``source`` may be a :class:`GenoProbTable` (expected codes, Haley-Knott
    convention), an :class:`F2Cross` (marker at that position) or a mapping
    from ``(chromosome, position)`` to genotype arrays coded 0/1/2.
    """
    if isinstance(source, GenoProbTable):
        j = source.locate(chromosome, position)
        return source.additive[:, j], source.dominance[:, j]
    if isinstance(source, F2Cross):
        g = source.marker_genotypes(chromosome, position)
    elif isinstance(source, Mapping):
        try:
            g = np.asarray(source[(str(chromosome), float(position))])
        except KeyError:
            raise InvalidInputError(f"no genotypes for locus {chromosome}@{position}") from None
    else:
        raise InvalidInputError(f"unsupported genotype source {type(source).__name__}")
    if np.any(g == MISSING):
        raise InvalidInputError("missing genotypes at a QTL; pass a GenoProbTable instead")
    g = g.astype(float)
    return g, (g == 1).astype(float)


def sample_locus_genotypes(table: GenoProbTable, chromosome: str, position: float, rng) -> np.ndarray:
    """Draw true genotypes from posterior probabilities."""
    p = table.probs[:, table.locate(chromosome, position)]
    u = rng.random(p.shape[0])[:, None]
    return (u > np.cumsum(p, axis=1)[:, :2]).sum(axis=1)


def qtl_design(codes: Sequence[tuple[np.ndarray, np.ndarray]], covariates=None,
               interactions: bool = False) -> np.ndarray:
    """Columns ``[a_1, d_1, a_2, d_2, ...]``, optionally with covariate interactions.

    With ``interactions`` each covariate column ``x`` adds ``x*a`` and ``x*d``
    for every QTL.
    """
    cols = []
    for a, d in codes:
        cols.extend([a, d])
    if interactions and covariates is not None and codes:
        X = np.asarray(covariates, dtype=float)
        X = X.reshape(X.shape[0], -1)
        for a, d in codes:
            for c in range(X.shape[1]):
                cols.extend([X[:, c] * a, X[:, c] * d])
    if not cols:
        return np.empty((0, 0))
    return np.column_stack(cols)


def genetic_means(model: HcgrModel, source, covariates=None, n: int | None = None) -> np.ndarray:
    """``mu*`` matrix ``(n, T)``: overall mean plus QTL and covariate effects."""
    n = _n_of(source) if n is None else n
    mu = np.tile(model.mean, (n, 1))
    for t, per in enumerate(model.qtls):
        for q in per:
            a, d = locus_codes(source, q.chromosome, q.position)
            mu[:, t] += q.additive * a + q.dominance * d
    if model.covariate_effects is not None:
        if covariates is None:
            raise InvalidInputError("model has covariate effects; covariates required")
        X = np.asarray(covariates, dtype=float).reshape(n, -1)
        mu += X @ model.covariate_effects.T
    return mu


def _n_of(source) -> int:
    if isinstance(source, GenoProbTable):
        return source.n_individuals
    if isinstance(source, F2Cross):
        return source.n_individuals
    if isinstance(source, Mapping) and source:
        return len(next(iter(source.values())))
    raise InvalidInputError(f"unsupported genotype source {type(source).__name__}")


# -- Result-1 quantities --------------------------------------------------------


def concentration_matrix(model: HcgrModel) -> np.ndarray:
    """Concentration matrix of ``y`` given the QTL genotypes, entry by entry.

    Depends on the DAG, ``beta`` and ``sigma2`` only; genotypes never enter.
    """
    T = model.n_traits
    B, s2 = model.beta, model.sigma2
    edge = np.zeros((T, T), dtype=bool)  # edge[t, s]: t -> s
    for u, v in model.dag.edges:
        edge[u, v] = True
    omega = np.empty((T, T))
    for t in range(T):
        omega[t, t] = 1.0 / s2[t] + sum(B[s, t] ** 2 / s2[s] for s in range(T) if edge[t, s])
        for v in range(T):
            if v == t:
                continue
            w = 0.0
            if edge[t, v]:
                w -= B[v, t] / s2[v]
            if edge[v, t]:
                w -= B[t, v] / s2[t]
            w += sum(B[s, v] * B[s, t] / s2[s] for s in range(T) if edge[v, s] and edge[t, s])
            omega[t, v] = w
    return omega


def linear_term(model: HcgrModel, mu_star: np.ndarray) -> np.ndarray:
    """Linear coefficients ``gamma_i`` for rows of ``mu_star`` (shape ``(T,)`` or ``(n, T)``)."""
    mu_star = np.asarray(mu_star, dtype=float)
    single = mu_star.ndim == 1
    M = np.atleast_2d(mu_star)
    B, s2 = model.beta, model.sigma2
    gamma = M / s2
    for t, s in model.dag.edges:  # t -> s
        gamma[:, t] -= B[s, t] * M[:, s] / s2[s]
    return gamma[0] if single else gamma


def joint_gaussian(model: HcgrModel, source, covariates=None) -> JointGaussian:
    mu = genetic_means(model, source, covariates)
    return JointGaussian(concentration_matrix(model), linear_term(model, mu))


def log_likelihood(model: HcgrModel, phenotypes, source, covariates=None) -> float:
    """Sum over individuals and traits of the structural-equation normal log-densities."""
    Y = np.asarray(phenotypes, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != model.n_traits:
        raise InvalidInputError(f"phenotypes must be (n, {model.n_traits})")
    if np.any(~(model.sigma2 > 0)):
        raise InvalidModelError("non-positive residual variance")
    mu = genetic_means(model, source, covariates)
    if mu.shape[0] != Y.shape[0]:
        raise InvalidInputError("phenotype and genotype row counts differ")
    resid = Y - mu - Y @ model.beta.T
    return float(np.sum(-0.5 * (LOG_2PI + np.log(model.sigma2) + resid**2 / model.sigma2)))


def simulate_phenotypes(model: HcgrModel, source, n: int | None = None, seed=None,
                        covariates=None) -> np.ndarray:
    """Generate ``(n, T)`` phenotypes trait by trait in topological order.

    QTL genotypes come from ``source``; with a :class:`GenoProbTable` they
    are drawn from the posterior probabilities first.
    """
    rng = np.random.default_rng(seed)
    order = topological_order(model.dag)
    if source is None or (isinstance(source, Mapping) and not source):
        if n is None:
            raise InvalidInputError("n is required when no genotype source is given")
        source, n_src = {}, n
    else:
        n_src = _n_of(source)
    if n is not None and n != n_src:
        raise InvalidInputError(f"n={n} but genotype source has {n_src} individuals")
    if isinstance(source, GenoProbTable):
        source = {
            (str(c), float(p)): sample_locus_genotypes(source, c, p, rng) for c, p in model.loci()
        }
    mu = genetic_means(model, source, covariates, n=n_src)
    Y = np.zeros_like(mu)
    noise = rng.standard_normal(mu.shape) * np.sqrt(model.sigma2)
    for t in order:
        Y[:, t] = mu[:, t] + Y @ model.beta[t] + noise[:, t]
    return Y


def fit_hcgr(dag: Dag, phenotypes, source, loci_per_trait=None, trait_names=()) -> HcgrModel:
    """Per-node least-squares (maximum likelihood) fit of the structural equations.

    ``loci_per_trait[t]`` lists ``(chromosome, position)`` QTL loci of trait
    ``t``; residual variances are ``RSS / n``.
    """
    Y = np.asarray(phenotypes, dtype=float)
    n, T = Y.shape
    loci_per_trait = loci_per_trait or [[] for _ in range(T)]
    mean = np.zeros(T)
    beta = np.zeros((T, T))
    sigma2 = np.zeros(T)
    qtls = []
    for t in range(T):
        pa = sorted(dag.parents(t))
        codes = [locus_codes(source, c, p) for c, p in loci_per_trait[t]]
        cols = [np.ones(n)] + [Y[:, v] for v in pa]
        G = qtl_design(codes)
        X = np.column_stack(cols + ([G] if G.size else []))
        coef, *_ = np.linalg.lstsq(X, Y[:, t], rcond=None)
        resid = Y[:, t] - X @ coef
        mean[t] = coef[0]
        for k, v in enumerate(pa):
            beta[t, v] = coef[1 + k]
        off = 1 + len(pa)
        qtls.append(
            tuple(
                QtlEffect(str(c), float(p), float(coef[off + 2 * k]), float(coef[off + 2 * k + 1]))
                for k, (c, p) in enumerate(loci_per_trait[t])
            )
        )
        sigma2[t] = float(resid @ resid) / n
    return HcgrModel(dag, mean, beta, sigma2, tuple(qtls), None, tuple(trait_names))
