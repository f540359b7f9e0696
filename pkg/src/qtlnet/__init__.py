"""Joint inference of causal phenotype networks and QTL architecture in F2 crosses."""

__version__ = "0.1.0"

from .estimators import ConditionalMapper, QTLnet
from .exceptions import (
    DegenerateInputError,
    InvalidInputError,
    InvalidModelError,
    InvalidStructureError,
    QTLnetError,
    UnsupportedError,
)
from .genetics import F2Cross, GeneticMap, GenoProbTable, calc_genoprob, haldane
from .graph import Dag, ExtendedGraph, Qtl, d_separated, markov_equivalent
from .hcgr import HcgrModel, QtlEffect, concentration_matrix, log_likelihood, simulate_phenotypes
from .mapping import conditional_lod, scan, select_architecture
from .mcmc import NodeScorer, averaged_network, exhaustive_posterior, model_average, run_chain
from .pathanal import implied_correlation

__all__ = [
    "ConditionalMapper", "DegenerateInputError", "Dag", "ExtendedGraph", "F2Cross", "GeneticMap",
    "GenoProbTable", "HcgrModel", "InvalidInputError", "InvalidModelError", "InvalidStructureError",
    "NodeScorer", "Qtl", "QtlEffect", "QTLnet", "QTLnetError", "UnsupportedError",
    "averaged_network", "calc_genoprob", "concentration_matrix", "conditional_lod", "d_separated",
    "exhaustive_posterior", "haldane", "implied_correlation", "log_likelihood", "markov_equivalent",
    "model_average", "run_chain", "scan", "select_architecture", "simulate_phenotypes",
]
