"""Wright path analysis on QTL-extended phenotype networks.

For an exogenous source ``u`` the correlation with a downstream trait ``v``
is ``sqrt(var(u)/var(v))`` times the sum, over directed paths ``u ~> v``, of
the products of the path's regression coefficients. QTLs use the additive
0/1/2 coding, whose F2 variance is 1/2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateInputError, InvalidInputError
from .graph import ExtendedGraph, Qtl, node_key, topological_order
from .hcgr import HcgrModel

ADDITIVE_VARIANCE = 0.5  # var of {0,1,2} at (1/4, 1/2, 1/4)
DOMINANCE_VARIANCE = 0.25  # var of the heterozygote indicator


def directed_paths(g, u, v) -> list[tuple]:
    """All simple directed paths from ``u`` to ``v`` as node tuples."""
    if u == v:
        raise InvalidInputError("source and target must differ")
    out = []

    def walk(node, path):
        for c in sorted(g.children(node), key=node_key):
            if c == v:
                out.append(tuple(path) + (c,))
            elif c not in path:
                walk(c, path + [c])

    walk(u, [u])
    return out


@dataclass(frozen=True)
class PathDecomposition:
    source: object
    target: int
    paths: tuple[tuple[tuple, float], ...]
    scale: float
    total: float

    def contributions(self) -> list[float]:
        return [self.scale * coef for _, coef in self.paths]

    def to_csv(self, path, names=None) -> None:
        def label(n):
            if isinstance(n, Qtl):
                return n.name
            return names[n] if names else f"Y{n + 1}"

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "contribution"])
            for (nodes, _), c in zip(self.paths, self.contributions()):
                w.writerow(["->".join(label(n) for n in nodes), f"{c:.10g}"])
            w.writerow(["total", f"{self.total:.10g}"])


def _edge_coefficients(model: HcgrModel, g: ExtendedGraph) -> dict:
    coef = {}
    for u, v in model.dag.edges:
        coef[(u, v)] = float(model.beta[v, u])
    by_locus = {(q.chromosome, q.position): q for q in g.qtls}
    for t, per in enumerate(model.qtls):
        for eff in per:
            coef[(by_locus[eff.locus], t)] = float(eff.additive)
    return coef


def moments(model: HcgrModel, include_dominance: bool = False) -> tuple[list, np.ndarray]:
    """Covariance matrix over QTL and phenotype nodes by forward propagation.

    Returns ``(nodes, cov)``. QTLs at distinct loci are treated as
    independent (unlinked). Dominance deviations only enter when
    ``include_dominance`` is set.
    """
    g = model.extended_graph()
    by_locus = {(q.chromosome, q.position): q for q in g.qtls}
    sources = list(g.qtls)
    dom = [f"dom:{q.name}" for q in g.qtls] if include_dominance else []
    phen = topological_order(model.dag)
    nodes = sources + dom + phen
    idx = {n: k for k, n in enumerate(nodes)}
    C = np.zeros((len(nodes), len(nodes)))
    for q in sources:
        C[idx[q], idx[q]] = ADDITIVE_VARIANCE
    for d in dom:
        C[idx[d], idx[d]] = DOMINANCE_VARIANCE
    for t in phen:
        inputs = [(idx[p], float(model.beta[t, p])) for p in model.dag.parents(t)]
        for eff in model.qtls[t]:
            q = by_locus[eff.locus]
            inputs.append((idx[q], float(eff.additive)))
            if include_dominance:
                inputs.append((idx[f"dom:{q.name}"], float(eff.dominance)))
        k = idx[t]
        for j in range(k):
            C[k, j] = C[j, k] = sum(c * C[i, j] for i, c in inputs)
        C[k, k] = sum(ci * cj * C[i, j] for i, ci in inputs for j, cj in inputs) + model.sigma2[t]
    keep = [k for k, n in enumerate(nodes) if not isinstance(n, str)]
    return [nodes[k] for k in keep], C[np.ix_(keep, keep)]


def _check_exogenous(g: ExtendedGraph, u) -> None:
    if isinstance(u, Qtl):
        return
    if g.base.parents(u):
        raise InvalidInputError(f"source Y{u + 1} has phenotype parents; path sums would miss treks")
    for q in g.parents(u):
        if g.children(q) != {u}:
            raise InvalidInputError(f"QTL {q.name} of the source also affects other traits")


def implied_correlation(model: HcgrModel, u, v: int, include_dominance: bool = False) -> PathDecomposition:
    """Correlation of exogenous node ``u`` (QTL or parentless trait) with trait ``v``.

    ``u`` may be a trait index, a :class:`Qtl` or a ``(chromosome, position)``
    locus.
    """
    g = model.extended_graph()
    if isinstance(u, tuple) and not isinstance(u, Qtl):
        matches = [q for q in g.qtls if (q.chromosome, q.position) == (str(u[0]), float(u[1]))]
        if not matches:
            raise InvalidInputError(f"no QTL at {u}")
        u = matches[0]
    _check_exogenous(g, u)
    nodes, C = moments(model, include_dominance)
    idx = {n: k for k, n in enumerate(nodes)}
    var_u, var_v = C[idx[u], idx[u]], C[idx[v], idx[v]]
    if var_u <= 0 or var_v <= 0:
        raise DegenerateInputError("zero-variance node")
    coef = _edge_coefficients(model, g)
    paths = []
    for p in directed_paths(g, u, v):
        prod = 1.0
        for a, b in zip(p, p[1:]):
            prod *= coef[(a, b)]
        paths.append((p, prod))
    scale = math.sqrt(var_u / var_v)
    return PathDecomposition(u, v, tuple(paths), scale, scale * sum(c for _, c in paths))
