"""Metropolis-Hastings sampling of phenotype networks with QTL remapping.

The chain lives on DAG space. Each node's genetic architecture is a
deterministic function of its parent set (a conditional genome scan followed
by one-peak-per-chromosome selection), so a structure's score is the sum of
per-node BIC terms and proposals only need the affected nodes re-mapped.
"""

from __future__ import annotations

import csv
import json
import math
import threading
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import DegenerateInputError, InvalidInputError, UnsupportedError
from .genetics import GenoProbTable
from .graph import Dag, Move, enumerate_dags, is_acyclic, neighborhood
from .hcgr import LOG_2PI
from .mapping import Architecture, _phenotype_matrix, scan, select_architecture


def score_node(trait: int, parents: Iterable[int], data, genoprobs: GenoProbTable,
               threshold: float = 5.0) -> tuple[Architecture, float]:
    """Map ``trait`` given ``parents`` and return its architecture and ``-BIC/2``.

    The node model regresses the trait on an intercept, its parents and the
    additive/dominance codes of each detected QTL; ``k`` is the rank of that
    design plus one for the residual variance.
    """
    Y = _phenotype_matrix(data)
    n = Y.shape[0]
    parents = tuple(sorted(parents))
    arch = select_architecture(scan(trait, parents, Y, genoprobs), threshold)
    cols = [np.ones(n)] + [Y[:, p] for p in parents]
    for q in arch.qtls:
        cols.append(genoprobs.additive[:, q.index])
        cols.append(genoprobs.dominance[:, q.index])
    X = np.column_stack(cols)
    y = Y[:, trait]
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rss = float(resid @ resid)
    if rss <= 0:
        raise DegenerateInputError(f"trait {trait} is fitted exactly by its node model")
    loglik = -0.5 * n * (LOG_2PI + math.log(rss / n) + 1.0)
    k = int(rank) + 1
    return arch, loglik - 0.5 * k * math.log(n)


class NodeScorer:
    """Memoized :func:`score_node` for one dataset.

    Results are keyed on ``(trait, parent set)``; sharing one scorer across
    threads is safe (insert-if-absent under a lock).
    """

    def __init__(self, phenotypes, genoprobs: GenoProbTable, threshold: float = 5.0):
        self.phenotypes = _phenotype_matrix(phenotypes)
        if self.phenotypes.shape[0] != genoprobs.n_individuals:
            raise InvalidInputError("phenotype rows and genotype-probability rows differ")
        self.genoprobs = genoprobs
        self.threshold = float(threshold)
        self._memo: dict[tuple[int, frozenset], tuple[Architecture, float]] = {}
        self._lock = threading.Lock()

    @property
    def n_traits(self) -> int:
        return self.phenotypes.shape[1]

    def __call__(self, trait: int, parents: Iterable[int]) -> tuple[Architecture, float]:
        key = (trait, frozenset(parents))
        hit = self._memo.get(key)
        if hit is None:
            hit = score_node(trait, key[1], self.phenotypes, self.genoprobs, self.threshold)
            with self._lock:
                hit = self._memo.setdefault(key, hit)
        return hit

    def structure_score(self, dag: Dag) -> float:
        return sum(self(t, dag.parents(t))[1] for t in range(dag.n_nodes))

    def __len__(self):
        return len(self._memo)


@dataclass(frozen=True)
class NetworkState:
    dag: Dag
    architectures: tuple[Architecture, ...]
    node_scores: tuple[float, ...]
    total: float

    @classmethod
    def from_dag(cls, dag: Dag, scorer: NodeScorer) -> NetworkState:
        if dag.n_nodes != scorer.n_traits:
            raise InvalidInputError(f"DAG has {dag.n_nodes} nodes, data {scorer.n_traits} traits")
        res = [scorer(t, dag.parents(t)) for t in range(dag.n_nodes)]
        scores = tuple(s for _, s in res)
        return cls(dag, tuple(a for a, _ in res), scores, sum(scores))


@lru_cache(maxsize=100_000)
def _moves(dag: Dag) -> tuple[tuple[Move, Dag], ...]:
    return tuple(neighborhood(dag))


def mh_step(state: NetworkState, scorer: NodeScorer, rng) -> NetworkState:
    """One Metropolis-Hastings update; returns ``state`` itself on rejection.

    A move is drawn uniformly from the current neighborhood. Only nodes whose
    parent sets change are re-mapped and re-scored. The acceptance ratio
    carries the uniform-prior Bayes factor and the neighborhood-size Hastings
    correction.
    """
    moves = _moves(state.dag)
    if not moves:
        return state
    move, proposal = moves[min(int(rng.random() * len(moves)), len(moves) - 1)]
    changed = (move.v,) if move.kind != "reverse" else (move.u, move.v)
    archs = list(state.architectures)
    scores = list(state.node_scores)
    for t in changed:
        archs[t], scores[t] = scorer(t, proposal.parents(t))
    total = sum(scores)
    log_ratio = total - state.total + math.log(len(moves)) - math.log(len(_moves(proposal)))
    if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
        return NetworkState(proposal, tuple(archs), tuple(scores), total)
    return state


@dataclass
class PosteriorSample:
    """Thinned, burned-in structures from one or more chains."""

    dags: list[Dag]
    scores: list[float]
    iterations: int
    thinning: int
    burnin: int
    seed: int | None = None
    acceptance_rate: float = float("nan")
    trace_scores: np.ndarray = field(default_factory=lambda: np.empty(0))
    trace_accepted: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    trait_names: tuple[str, ...] = ()

    def __len__(self):
        return len(self.dags)

    @property
    def n_nodes(self) -> int:
        return self.dags[0].n_nodes

    def structure_counts(self) -> Counter:
        return Counter(self.dags)

    def top_structures(self, k: int | None = None) -> list[tuple[Dag, float]]:
        """Most frequent sampled structures with their sample frequencies."""
        c = self.structure_counts()
        n = len(self.dags)
        ranked = sorted(c.items(), key=lambda kv: (-kv[1], sorted(kv[0].edges)))
        return [(d, cnt / n) for d, cnt in ranked[:k]]

    def settings(self) -> dict:
        return {"iterations": self.iterations, "thinning": self.thinning, "burnin": self.burnin,
                "seed": self.seed}

    def write_trace(self, path, header: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "score", "accepted"])
            for k, (s, a) in enumerate(zip(self.trace_scores, self.trace_accepted), start=1):
                w.writerow([k, f"{s:.10g}", int(a)])


def pool(samples: Sequence[PosteriorSample]) -> PosteriorSample:
    """Concatenate the draws of several chains."""
    if not samples:
        raise InvalidInputError("no chains to pool")
    first = samples[0]
    acc = [s.acceptance_rate for s in samples]
    return PosteriorSample(
        [d for s in samples for d in s.dags],
        [x for s in samples for x in s.scores],
        first.iterations, first.thinning, first.burnin, first.seed,
        float(np.mean(acc)),
        np.concatenate([s.trace_scores for s in samples]),
        np.concatenate([s.trace_accepted for s in samples]),
        first.trait_names,
    )


def run_chain(scorer: NodeScorer, iterations: int = 30000, thinning: int = 10, burnin: int = 300,
              seed=None, initial: Dag | None = None, keep_trace: bool = True) -> PosteriorSample:
    """Run one chain; a structure is stored every ``thinning`` iterations after
    discarding the first ``burnin`` stored structures.

    Starts from the empty graph unless ``initial`` is given.
    """
    if iterations < thinning or thinning < 1:
        raise InvalidInputError("need iterations >= thinning >= 1")
    if burnin < 0 or burnin >= iterations // thinning:
        raise InvalidInputError("burn-in must leave at least one stored structure")
    rng = np.random.default_rng(seed)
    state = NetworkState.from_dag(initial or Dag(scorer.n_traits), scorer)
    dags, scores = [], []
    trace_s = np.empty(iterations if keep_trace else 0)
    trace_a = np.zeros(iterations if keep_trace else 0, dtype=bool)
    n_acc = 0
    stored = 0
    for it in range(1, iterations + 1):
        new = mh_step(state, scorer, rng)
        accepted = new is not state
        n_acc += accepted
        state = new
        if keep_trace:
            trace_s[it - 1] = state.total
            trace_a[it - 1] = accepted
        if it % thinning == 0:
            stored += 1
            if stored > burnin:
                dags.append(state.dag)
                scores.append(state.total)
    return PosteriorSample(dags, scores, iterations, thinning, burnin, seed, n_acc / iterations,
                           trace_s, trace_a)


RELATIONS = ("forward", "backward", "none")


@dataclass(frozen=True)
class EdgePosterior:
    """Posterior probabilities of ``u -> v``, ``u <- v`` and no edge for each pair ``u < v``."""

    n_nodes: int
    probs: Mapping[tuple[int, int], tuple[float, float, float]]
    n_samples: int = 0
    trait_names: tuple[str, ...] = ()

    def __getitem__(self, pair: tuple[int, int]) -> tuple[float, float, float]:
        u, v = pair
        if u < v:
            return self.probs[(u, v)]
        f, b, none = self.probs[(v, u)]
        return (b, f, none)

    def argmax(self, u: int, v: int) -> str:
        p = self[(u, v)]
        return RELATIONS[int(np.argmax(p))]

    def names(self) -> list[str]:
        return list(self.trait_names) or [f"Y{t + 1}" for t in range(self.n_nodes)]

    def to_dict(self, settings: dict | None = None) -> dict:
        return {
            "traits": self.names(),
            "pairs": [
                {"u": u, "v": v, "p_uv": p[0], "p_vu": p[1], "p_none": p[2]}
                for (u, v), p in sorted(self.probs.items())
            ],
            "samples": self.n_samples,
            "settings": settings or {},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> EdgePosterior:
        traits = tuple(d.get("traits", ()))
        probs = {(int(p["u"]), int(p["v"])): (float(p["p_uv"]), float(p["p_vu"]), float(p["p_none"]))
                 for p in d["pairs"]}
        n_nodes = len(traits) if traits else 1 + max(max(k) for k in probs)
        return cls(n_nodes, probs, int(d.get("samples", 0)), traits)

    def to_csv(self, path) -> None:
        names = self.names()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u", "v", "p_u_to_v", "p_v_to_u", "p_none"])
            for (u, v), p in sorted(self.probs.items()):
                w.writerow([names[u], names[v]] + [f"{x:.6f}" for x in p])


def _edge_posterior(weighted: Iterable[tuple[Dag, float]], n_nodes: int, n_samples: int,
                    trait_names=()) -> EdgePosterior:
    acc = {(u, v): [0.0, 0.0, 0.0] for u in range(n_nodes) for v in range(u + 1, n_nodes)}
    total = 0.0
    for dag, w in weighted:
        total += w
        for (u, v), slot in acc.items():
            if (u, v) in dag.edges:
                slot[0] += w
            elif (v, u) in dag.edges:
                slot[1] += w
            else:
                slot[2] += w
    probs = {k: (a / total, b / total, c / total) for k, (a, b, c) in acc.items()}
    return EdgePosterior(n_nodes, probs, n_samples, tuple(trait_names))


def model_average(samples: PosteriorSample) -> EdgePosterior:
    """Sample frequencies of each pairwise causal relation."""
    if len(samples) == 0:
        raise InvalidInputError("empty posterior sample")
    return _edge_posterior(((d, 1.0) for d in samples.dags), samples.n_nodes, len(samples),
                           samples.trait_names)


def distribution_edge_posterior(dist: Mapping[Dag, float]) -> EdgePosterior:
    """Relation marginals of an explicit distribution over DAGs."""
    n_nodes = next(iter(dist)).n_nodes
    return _edge_posterior(dist.items(), n_nodes, 0)


@dataclass(frozen=True)
class AveragedNetwork:
    n_nodes: int
    edges: Mapping[tuple[int, int], float]
    unresolved: tuple[tuple[int, int], ...]
    cyclic: bool
    trait_names: tuple[str, ...] = ()

    def to_dot(self, qtl_labels: Mapping[int, Sequence[str]] | None = None) -> str:
        names = list(self.trait_names) or [f"Y{t + 1}" for t in range(self.n_nodes)]
        lines = ["digraph averaged {"]
        for t in range(self.n_nodes):
            lines.append(f'  "{names[t]}";')
        for t, labels in sorted((qtl_labels or {}).items()):
            for lab in labels:
                lines.append(f'  "{lab}" [shape=box, style=filled, fillcolor=lightgrey];')
                lines.append(f'  "{lab}" -> "{names[t]}" [style=dashed];')
        for (u, v), p in sorted(self.edges.items()):
            grey = min(90, int(round(100 * (1.0 - p))))
            lines.append(f'  "{names[u]}" -> "{names[v]}" [label="{p:.3f}", weight="{p:.6f}", '
                         f'color="gray{grey}"];')
        for u, v in self.unresolved:
            lines.append(f'  // unresolved: {names[u]} -- {names[v]}')
        lines.append("}")
        return "\n".join(lines) + "\n"


def averaged_network(ep: EdgePosterior, rule: str = "max", tau: float | None = None) -> AveragedNetwork:
    """Assemble per-pair relations into a network.

    ``rule="max"`` keeps each pair's most probable relation; ``rule="threshold"``
    keeps a relation only if its probability is at least ``tau`` and leaves
    the pair unresolved otherwise. The result may contain cycles; this is
    flagged rather than treated as an error.
    """
    if rule not in ("max", "threshold"):
        raise InvalidInputError(f"unknown rule {rule!r}")
    if rule == "threshold" and (tau is None or not 0 < tau <= 1):
        raise InvalidInputError("threshold rule needs tau in (0, 1]")
    edges, unresolved = {}, []
    for (u, v), p in sorted(ep.probs.items()):
        if rule == "max":
            k = int(np.argmax(p))
        else:
            hits = [k for k in range(3) if p[k] >= tau]
            if not hits:
                unresolved.append((u, v))
                continue
            k = max(hits, key=lambda j: p[j])
        if k == 0:
            edges[(u, v)] = p[0]
        elif k == 1:
            edges[(v, u)] = p[1]
    cyclic = not is_acyclic(ep.n_nodes, edges)
    return AveragedNetwork(ep.n_nodes, edges, tuple(unresolved), cyclic, ep.trait_names)


def exhaustive_posterior(scorer: NodeScorer, max_nodes: int = 4) -> dict[Dag, float]:
    """Exact posterior over every DAG under a uniform structure prior."""
    T = scorer.n_traits
    if T > max_nodes:
        raise UnsupportedError(f"exhaustive posterior limited to {max_nodes} traits")
    dags = enumerate_dags(T, max_nodes=max_nodes)
    s = np.array([scorer.structure_score(d) for d in dags])
    w = np.exp(s - s.max())
    w /= w.sum()
    return dict(zip(dags, w.tolist()))


def posterior_document(ep: EdgePosterior, sample: PosteriorSample | None = None,
                       settings: dict | None = None, top: int = 20) -> dict:
    doc = ep.to_dict(settings)
    if sample is not None:
        doc["structures"] = [
            {"edges": [[u, v] for u, v in sorted(d.edges)], "frequency": f}
            for d, f in sample.top_structures(top)
        ]
        doc["acceptance_rate"] = sample.acceptance_rate
    return doc


def dump_posterior(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

