"""Haley-Knott genome scans, conditional LOD scores and QTL selection.

A conditional scan of trait ``y`` given phenotypes ``x`` compares, at every
grid position, the regression of ``y`` on ``[1, x]`` with the regression on
``[1, x, a, d]`` where ``a`` and ``d`` are the expected additive and
dominance codes. The LOD is ``(n/2) log10(RSS0 / RSS1)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import DegenerateInputError, InvalidInputError
from .genetics import F2Cross, GenoProbTable
from .hcgr import locus_codes, qtl_design

_RANK_TOL = 1e-10


def _phenotype_matrix(data) -> np.ndarray:
    if isinstance(data, F2Cross):
        return data.phenotypes
    Y = np.asarray(data, dtype=float)
    return Y[:, None] if Y.ndim == 1 else Y


def _check_sets(trait: int, conditioning: Sequence[int], T: int) -> tuple[int, ...]:
    cond = tuple(sorted(int(c) for c in conditioning))
    if not 0 <= trait < T or any(not 0 <= c < T for c in cond):
        raise InvalidInputError(f"trait indices must lie in [0, {T})")
    if trait in cond:
        raise InvalidInputError("trait may not be in its own conditioning set")
    if len(set(cond)) != len(cond):
        raise InvalidInputError("duplicate conditioning traits")
    return cond


class DetectedQtl(NamedTuple):
    chromosome: str
    position: float
    lod: float
    index: int
    interval: tuple[float, float] = (float("nan"), float("nan"))


@dataclass(frozen=True)
class ScanResult:
    trait: int
    conditioning: tuple[int, ...]
    chromosome_names: tuple[str, ...]
    grids: tuple[np.ndarray, ...]
    lod: np.ndarray
    degenerate: np.ndarray

    @property
    def positions(self) -> np.ndarray:
        return np.concatenate(self.grids)

    def chromosome_lod(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        start = 0
        for c, g in zip(self.chromosome_names, self.grids):
            if c == str(name):
                return g, self.lod[start:start + len(g)]
            start += len(g)
        raise InvalidInputError(f"unknown chromosome {name!r}")

    def max_lod(self) -> float:
        return float(np.max(self.lod))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["chromosome", "position_cM", "lod"])
            start = 0
            for c, g in zip(self.chromosome_names, self.grids):
                for k, p in enumerate(g):
                    w.writerow([c, repr(float(p)), f"{self.lod[start + k]:.10g}"])
                start += len(g)


@dataclass(frozen=True)
class Architecture:
    trait: int
    qtls: tuple[DetectedQtl, ...] = ()
    threshold: float = 5.0
    conditioning: tuple[int, ...] = field(default=())

    @property
    def loci(self) -> list[tuple[str, float]]:
        return [(q.chromosome, q.position) for q in self.qtls]

    @property
    def chromosomes(self) -> list[str]:
        return [q.chromosome for q in self.qtls]


def _orthonormal_basis(X: np.ndarray) -> np.ndarray:
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    keep = s > _RANK_TOL * max(1.0, s[0] if s.size else 1.0)
    return U[:, keep]


def hk_lod_profile(y: np.ndarray, X0: np.ndarray, A: np.ndarray, D: np.ndarray):
    """LOD of adding ``(A[:, j], D[:, j])`` to the null design ``X0``, for every ``j``.

    Returns ``(lod, degenerate)``. A position whose two codes are (nearly)
    collinear with each other or with ``X0`` falls back to the estimable
    column and is flagged.
    """
    n = y.shape[0]
    Q = _orthonormal_basis(X0)
    r = y - Q @ (Q.T @ y)
    rss0 = float(r @ r)
    if rss0 <= 1e-12 * max(1.0, float(y @ y)):
        raise DegenerateInputError("null model fits the trait exactly")
    Ar = A - Q @ (Q.T @ A)
    Dr = D - Q @ (Q.T @ D)
    saa = np.einsum("ij,ij->j", Ar, Ar)
    sdd = np.einsum("ij,ij->j", Dr, Dr)
    sad = np.einsum("ij,ij->j", Ar, Dr)
    ra = r @ Ar
    rd = r @ Dr
    tol = _RANK_TOL * n
    det = saa * sdd - sad**2
    full = (saa > tol) & (sdd > tol) & (det > 1e-8 * saa * sdd)
    with np.errstate(divide="ignore", invalid="ignore"):
        quad_full = (sdd * ra**2 - 2.0 * sad * ra * rd + saa * rd**2) / det
        quad_a = ra**2 / saa
        quad_d = rd**2 / sdd
    quad = np.where(full, quad_full, np.where(saa > tol, quad_a, np.where(sdd > tol, quad_d, 0.0)))
    quad = np.clip(quad, 0.0, rss0)
    rss1 = rss0 - quad
    with np.errstate(divide="ignore"):
        lod = 0.5 * n * np.log10(rss0 / rss1)
    return lod, ~full


def scan(trait: int, conditioning: Sequence[int], data, genoprobs: GenoProbTable) -> ScanResult:
    """Genome scan of ``trait`` conditional on the phenotypes in ``conditioning``."""
    Y = _phenotype_matrix(data)
    if Y.shape[0] != genoprobs.n_individuals:
        raise InvalidInputError("phenotype rows and genotype-probability rows differ")
    cond = _check_sets(trait, conditioning, Y.shape[1])
    X0 = np.column_stack([np.ones(Y.shape[0])] + [Y[:, c] for c in cond])
    lod, degenerate = hk_lod_profile(Y[:, trait], X0, genoprobs.additive, genoprobs.dominance)
    return ScanResult(trait, cond, genoprobs.chromosome_names, genoprobs.grids, lod, degenerate)


def rss(y: np.ndarray, X: np.ndarray) -> float:
    """Residual sum of squares of the least-squares fit (rank-deficient designs allowed)."""
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    return float(r @ r)


def lod_vs_mean(y: np.ndarray, X: np.ndarray | None = None) -> float:
    """``LOD(y, X)``: regression on ``[1, X]`` against the intercept-only model."""
    n = y.shape[0]
    one = np.ones((n, 1))
    X1 = one if X is None or X.size == 0 else np.column_stack([one, X])
    return 0.5 * n * np.log10(rss(y, one) / rss(y, X1))


def conditional_lod(trait: int, locus: tuple[str, float], conditioning: Sequence[int], data,
                    genoprobs: GenoProbTable, interactions: bool = False) -> float:
    """LOD for a single locus given ``conditioning`` traits.

    With ``interactions`` the alternative also contains the products of each
    conditioning trait with the QTL codes; the null keeps the traits alone.
    Columns without variation are dropped by the rank-revealing solver.
    """
    Y = _phenotype_matrix(data)
    cond = _check_sets(trait, conditioning, Y.shape[1])
    n = Y.shape[0]
    y = Y[:, trait]
    Xc = Y[:, list(cond)] if cond else np.empty((n, 0))
    a, d = locus_codes(genoprobs, *locus)
    G = qtl_design([(a, d)], Xc if cond else None, interactions=interactions)
    X0 = np.column_stack([np.ones(n), Xc])
    X1 = np.column_stack([X0, G])
    rss0, rss1 = rss(y, X0), rss(y, X1)
    if rss0 <= 0:
        raise DegenerateInputError("null model fits the trait exactly")
    return 0.5 * n * float(np.log10(rss0 / rss1))


def select_architecture(result: ScanResult, threshold: float = 5.0, drop: float = 1.5) -> Architecture:
    """One QTL per chromosome: the highest grid position if its LOD reaches ``threshold``.

    Ties go to the lowest position. ``drop`` sets the LOD support interval
    recorded for each QTL.
    """
    if not threshold > 0:
        raise InvalidInputError("threshold must be > 0")
    found = []
    start = 0
    for c, g in zip(result.chromosome_names, result.grids):
        lod = result.lod[start:start + len(g)]
        k = int(np.argmax(lod))
        if lod[k] >= threshold:
            floor = lod[k] - drop
            lo = hi = k
            while lo > 0 and lod[lo - 1] >= floor:
                lo -= 1
            while hi < len(g) - 1 and lod[hi + 1] >= floor:
                hi += 1
            found.append(DetectedQtl(c, float(g[k]), float(lod[k]), start + k, (float(g[lo]), float(g[hi]))))
        start += len(g)
    return Architecture(result.trait, tuple(found), float(threshold), result.conditioning)


def permutation_threshold(trait: int, conditioning: Sequence[int], data, genoprobs: GenoProbTable,
                          n_perm: int = 1000, alpha: float = 0.05, seed=None) -> float:
    """Genome-wide ``1 - alpha`` quantile of the maximum LOD under row permutation.

    The trait and its conditioning traits are shuffled together so their
    mutual dependence is kept while any link to the genotypes is broken.
    """
    if n_perm < 100:
        raise InvalidInputError("n_perm must be >= 100")
    if not 0 < alpha <= 1:
        raise InvalidInputError("alpha must lie in (0, 1]")
    Y = _phenotype_matrix(data)
    cond = _check_sets(trait, conditioning, Y.shape[1])
    cols = [trait] + list(cond)
    rng = np.random.default_rng(seed)
    A, D = genoprobs.additive, genoprobs.dominance
    maxima = np.empty(n_perm)
    for k in range(n_perm):
        Yp = Y[rng.permutation(Y.shape[0])][:, cols]
        X0 = np.column_stack([np.ones(Y.shape[0]), Yp[:, 1:]])
        lod, _ = hk_lod_profile(Yp[:, 0], X0, A, D)
        maxima[k] = lod.max()
    return float(np.quantile(maxima, 1.0 - alpha))
