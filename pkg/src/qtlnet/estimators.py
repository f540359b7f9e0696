"""scikit-learn style front ends.

Both estimators take the phenotype matrix as ``X`` and the genotype
probability table as the second ``fit`` argument, follow the
``get_params``/``set_params`` protocol and expose results as trailing
underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidInputError
from .graph import Dag
from .mapping import scan, select_architecture
from .mcmc import NodeScorer, averaged_network, model_average, pool, run_chain
from .validation import check_genoprobs, check_phenotypes


def chain_seeds(random_state, n_chains: int) -> list[int]:
    """Independent integer seeds for ``n_chains`` chains derived from one seed."""
    if isinstance(random_state, np.random.Generator):
        return [int(s) for s in random_state.integers(0, 2**63 - 1, size=n_chains)]
    children = np.random.SeedSequence(random_state).spawn(n_chains)
    return [int(c.generate_state(1, np.uint64)[0] >> 1) for c in children]


class QTLnet(BaseEstimator):
    """Joint inference of a phenotype network and per-trait QTL architecture.

    Parameters
    ----------
    threshold : float
        LOD threshold for calling a QTL during each conditional scan.
    iterations, thinning, burnin : int
        Chain length, storage interval and number of stored structures to drop.
    n_chains : int
        Independent chains whose draws are pooled.
    initial : Dag or None
        Starting structure; the empty graph when None.
    random_state : int, Generator or None

    Attributes
    ----------
    scorer_ : NodeScorer
    chains_ : list of PosteriorSample
    sample_ : PosteriorSample
        Pooled draws.
    edge_posterior_ : EdgePosterior
    acceptance_rate_ : float
    trait_names_ : tuple of str
    """

    def __init__(self, threshold=5.0, iterations=30000, thinning=10, burnin=300, n_chains=1,
                 initial=None, random_state=None):
        self.threshold = threshold
        self.iterations = iterations
        self.thinning = thinning
        self.burnin = burnin
        self.n_chains = n_chains
        self.initial = initial
        self.random_state = random_state

    def fit(self, X, genoprobs, trait_names=None):
        Y, names = check_phenotypes(X)
        check_genoprobs(genoprobs, Y.shape[0])
        self.n_features_in_ = Y.shape[1]
        if hasattr(X, "columns"):
            self.feature_names_in_ = np.asarray(names, dtype=object)
        if trait_names is not None:
            names = tuple(str(t) for t in trait_names)
            if len(names) != Y.shape[1]:
                raise InvalidInputError("one trait name per column required")
        self.trait_names_ = names
        self.scorer_ = NodeScorer(Y, genoprobs, self.threshold)
        self.chain_seeds_ = chain_seeds(self.random_state, self.n_chains)
        self.chains_ = []
        for seed in self.chain_seeds_:
            s = run_chain(self.scorer_, self.iterations, self.thinning, self.burnin, seed, self.initial)
            s.trait_names = names
            self.chains_.append(s)
        self.sample_ = pool(self.chains_)
        self.edge_posterior_ = model_average(self.sample_)
        self.acceptance_rate_ = self.sample_.acceptance_rate
        return self

    def network(self, rule="max", tau=None):
        """Model-averaged network (see :func:`qtlnet.mcmc.averaged_network`)."""
        check_is_fitted(self, "edge_posterior_")
        return averaged_network(self.edge_posterior_, rule, tau)

    def best_structure(self) -> Dag:
        check_is_fitted(self, "sample_")
        return self.sample_.top_structures(1)[0][0]

    def architectures(self, dag: Dag | None = None):
        """Per-trait QTL architectures implied by ``dag`` (default: most sampled structure)."""
        check_is_fitted(self, "scorer_")
        dag = dag or self.best_structure()
        return [self.scorer_(t, dag.parents(t))[0] for t in range(dag.n_nodes)]


class ConditionalMapper(BaseEstimator):
    """Map every trait conditional on its parents in a fixed ``network``.

    With ``network=None`` each trait is scanned unconditionally.

    Attributes
    ----------
    scans_ : list of ScanResult
    architectures_ : list of Architecture
    """

    def __init__(self, network=None, threshold=5.0, drop=1.5):
        self.network = network
        self.threshold = threshold
        self.drop = drop

    def fit(self, X, genoprobs):
        Y, names = check_phenotypes(X)
        check_genoprobs(genoprobs, Y.shape[0])
        T = Y.shape[1]
        self.n_features_in_ = T
        self.trait_names_ = names
        dag = self.network if self.network is not None else Dag(T)
        self.scans_ = [scan(t, sorted(dag.parents(t)), Y, genoprobs) for t in range(T)]
        self.architectures_ = [select_architecture(s, self.threshold, self.drop) for s in self.scans_]
        return self

    def detected(self) -> list[list[str]]:
        """Chromosomes carrying a QTL, per trait."""
        check_is_fitted(self, "architectures_")
        return [a.chromosomes for a in self.architectures_]
