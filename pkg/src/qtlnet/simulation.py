"""Five-phenotype, four-QTL simulation design.

Network (0-based trait indices, shown 1-based in names)::

    Q1 -> Y1;  Y1 -> Y2, Y1 -> Y3, Y1 -> Y4;  Y3 -> Y4
    Q2 -> Y2;  Q4 -> Y4;  Q5 -> Y5;  Y2 -> Y5, Y3 -> Y5, Y4 -> Y5

Five 100 cM chromosomes carry ten equally spaced markers each; QTL ``Qt``
sits on the middle marker of chromosome ``t``. Residual variances are 1.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidInputError
from .genetics import F2Cross, GeneticMap, simulate_f2_genotypes
from .graph import Dag
from .hcgr import HcgrModel, QtlEffect, simulate_phenotypes

BENCHMARK_EDGES = ((0, 1), (0, 2), (0, 3), (2, 3), (1, 4), (2, 4), (3, 4))
BENCHMARK_QTL_TRAITS = (0, 1, 3, 4)  # Q1, Q2, Q4, Q5
BENCHMARK_TRAITS = ("Y1", "Y2", "Y3", "Y4", "Y5")
MIDDLE_MARKER = 4  # fifth of ten markers, 44.4 cM

SIGNALS = {
    # (additive range, dominance range)
    "strong": ((0.5, 1.0), (0.0, 0.5)),
    "weak": ((0.0, 0.5), (0.0, 0.25)),
}


def _seed_sequence(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def benchmark_dag() -> Dag:
    return Dag(5, BENCHMARK_EDGES)


def benchmark_map() -> GeneticMap:
    return GeneticMap.equally_spaced(n_chromosomes=5, length=100.0, n_markers=10)


def qtl_locus(trait: int, genetic_map: GeneticMap | None = None) -> tuple[str, float]:
    """Locus of the QTL driving ``trait`` (its chromosome's middle marker)."""
    genetic_map = genetic_map or benchmark_map()
    chrom = genetic_map.chromosome(str(trait + 1))
    return chrom.name, float(chrom.positions[MIDDLE_MARKER])


def sample_beta(signal: str, size, rng) -> np.ndarray:
    if signal == "strong":
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return sign * rng.uniform(0.5, 1.5, size)
    if signal == "weak":
        return rng.uniform(-0.5, 0.5, size)
    raise InvalidInputError(f"unknown signal preset {signal!r}")


def benchmark_model(signal: str = "strong", seed=None, genetic_map: GeneticMap | None = None) -> HcgrModel:
    """Draw one parameter set for the design under a ``strong`` or ``weak`` preset."""
    if signal not in SIGNALS:
        raise InvalidInputError(f"unknown signal preset {signal!r}")
    rng = np.random.default_rng(seed)
    (alo, ahi), (dlo, dhi) = SIGNALS[signal]
    dag = benchmark_dag()
    beta = np.zeros((5, 5))
    for (u, v), b in zip(BENCHMARK_EDGES, sample_beta(signal, len(BENCHMARK_EDGES), rng)):
        beta[v, u] = b
    qtls = [() for _ in range(5)]
    for t in BENCHMARK_QTL_TRAITS:
        chrom, pos = qtl_locus(t, genetic_map)
        qtls[t] = (QtlEffect(chrom, pos, float(rng.uniform(alo, ahi)), float(rng.uniform(dlo, dhi))),)
    return HcgrModel(dag, np.zeros(5), beta, np.ones(5), tuple(qtls), None, BENCHMARK_TRAITS)


def midpoint_model(genetic_map: GeneticMap | None = None) -> HcgrModel:
    """Strong-signal midpoint: all betas 1, additive 0.75, dominance 0.25."""
    beta = np.zeros((5, 5))
    for u, v in BENCHMARK_EDGES:
        beta[v, u] = 1.0
    qtls = [() for _ in range(5)]
    for t in BENCHMARK_QTL_TRAITS:
        chrom, pos = qtl_locus(t, genetic_map)
        qtls[t] = (QtlEffect(chrom, pos, 0.75, 0.25),)
    return HcgrModel(benchmark_dag(), np.zeros(5), beta, np.ones(5), tuple(qtls), None, BENCHMARK_TRAITS)


def simulate_cross(model: HcgrModel, genetic_map: GeneticMap, n: int, seed=None) -> F2Cross:
    """F2 genotypes on ``genetic_map`` and phenotypes from ``model``."""
    geno_seed, pheno_seed = _seed_sequence(seed).spawn(2)
    geno = simulate_f2_genotypes(genetic_map, n, geno_seed)
    cross = F2Cross(genetic_map, geno, np.zeros((n, model.n_traits)), list(model.trait_names))
    cross.phenotypes = simulate_phenotypes(model, cross, n, pheno_seed)
    return cross


def simulate_benchmark(n: int = 500, signal: str = "strong", seed=None) -> tuple[F2Cross, HcgrModel]:
    """One replicate: fresh parameters, genotypes and phenotypes."""
    param_seed, data_seed = _seed_sequence(seed).spawn(2)
    gmap = benchmark_map()
    model = benchmark_model(signal, param_seed, gmap)
    return simulate_cross(model, gmap, n, data_seed), model
