"""Genetic maps, F2 crosses and QTL genotype probabilities.

Genotypes are coded as integers: ``0`` = AA, ``1`` = AB, ``2`` = BB and
``-1`` = missing. The same coding doubles as the additive predictor
(number of B alleles) used by the regression code.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DegenerateInputError, InvalidInputError

logger = logging.getLogger(__name__)

AA, AB, BB, MISSING = 0, 1, 2, -1
GENOTYPE_LETTERS = {"A": AA, "H": AB, "B": BB, "-": MISSING}
_LETTER_OF = {v: k for k, v in GENOTYPE_LETTERS.items()}
_MISSING_PHENO = {"", "NA", "na", "NaN", "nan", "-", "."}

F2_PRIOR = np.array([0.25, 0.5, 0.25])


def haldane(distance_cm):
    """Recombination fraction for a map distance in cM (no interference)."""
    d = np.asarray(distance_cm, dtype=float)
    return 0.5 * (1.0 - np.exp(-2.0 * d / 100.0))


def f2_transition(r: float) -> np.ndarray:
    """3x3 genotype transition matrix between two loci at recombination fraction ``r``.

    Rows index the genotype at the left locus, columns the right. Lumping the
    two phases of AB is exact because both gametes are independent Markov
    chains with the same recombination fraction.
    """
    s = 1.0 - r
    return np.array(
        [
            [s * s, 2 * r * s, r * r],
            [r * s, s * s + r * r, r * s],
            [r * r, 2 * r * s, s * s],
        ]
    )


@dataclass(frozen=True)
class Chromosome:
    name: str
    markers: tuple[str, ...]
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "markers", tuple(self.markers))
        if len(self.markers) != len(pos):
            raise InvalidInputError(
                f"chromosome {self.name}: {len(self.markers)} names for {len(pos)} positions"
            )
        if len(pos) == 0:
            raise InvalidInputError(f"chromosome {self.name} has no markers")
        if np.any(pos < 0) or not np.all(np.isfinite(pos)):
            raise InvalidInputError(f"chromosome {self.name}: positions must be finite and >= 0")
        if np.any(np.diff(pos) < 0):
            raise InvalidInputError(f"chromosome {self.name}: positions must be sorted")


@dataclass(frozen=True)
class GeneticMap:
    """Ordered chromosomes, each a list of named markers with cM positions.

    Co-located markers (0 cM apart) are allowed; they are simply completely
    linked.
    """

    chromosomes: tuple[Chromosome, ...]

    def __post_init__(self):
        object.__setattr__(self, "chromosomes", tuple(self.chromosomes))
        if not self.chromosomes:
            raise InvalidInputError("genetic map has no chromosomes")
        names = self.marker_names
        if len(set(names)) != len(names):
            raise InvalidInputError("marker names must be unique genome-wide")
        chrom_names = [c.name for c in self.chromosomes]
        if len(set(chrom_names)) != len(chrom_names):
            raise InvalidInputError("duplicate chromosome ids")

    @classmethod
    def equally_spaced(cls, n_chromosomes=5, length=100.0, n_markers=10) -> GeneticMap:
        """Map with ``n_markers`` evenly spread over ``[0, length]`` on each chromosome."""
        chroms = []
        for c in range(1, n_chromosomes + 1):
            pos = np.linspace(0.0, length, n_markers) if n_markers > 1 else np.zeros(1)
            names = [f"c{c}m{j + 1}" for j in range(n_markers)]
            chroms.append(Chromosome(str(c), tuple(names), pos))
        return cls(tuple(chroms))

    @property
    def marker_names(self) -> list[str]:
        return [m for c in self.chromosomes for m in c.markers]

    @property
    def n_markers(self) -> int:
        return sum(len(c.markers) for c in self.chromosomes)

    @property
    def chromosome_names(self) -> list[str]:
        return [c.name for c in self.chromosomes]

    def chromosome(self, name: str) -> Chromosome:
        for c in self.chromosomes:
            if c.name == str(name):
                return c
        raise InvalidInputError(f"unknown chromosome {name!r}")

    def marker_slices(self) -> list[slice]:
        out, start = [], 0
        for c in self.chromosomes:
            out.append(slice(start, start + len(c.markers)))
            start += len(c.markers)
        return out

    def marker_index(self, chromosome: str, position: float, tol: float = 1e-6) -> int:
        """Column index of the marker at ``position`` on ``chromosome``."""
        for c, sl in zip(self.chromosomes, self.marker_slices()):
            if c.name == str(chromosome):
                hits = np.flatnonzero(np.abs(c.positions - position) <= tol)
                if hits.size == 0:
                    raise InvalidInputError(f"no marker at {chromosome}@{position} cM")
                return sl.start + int(hits[0])
        raise InvalidInputError(f"unknown chromosome {chromosome!r}")

    # -- map CSV: marker,chromosome,position_cM ---------------------------

    @classmethod
    def read_csv(cls, path) -> GeneticMap:
        rows: dict[str, list[tuple[float, str]]] = {}
        order: list[str] = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"marker", "chromosome", "position_cM"} - set(reader.fieldnames or [])
            if missing:
                raise InvalidInputError(f"map file lacks columns {sorted(missing)}")
            for row in reader:
                chrom = row["chromosome"].strip()
                if chrom not in rows:
                    rows[chrom] = []
                    order.append(chrom)
                rows[chrom].append((float(row["position_cM"]), row["marker"].strip()))
        chroms = []
        for chrom in order:
            entries = sorted(rows[chrom], key=lambda e: e[0])
            chroms.append(
                Chromosome(chrom, tuple(m for _, m in entries), np.array([p for p, _ in entries]))
            )
        return cls(tuple(chroms))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["marker", "chromosome", "position_cM"])
            for c in self.chromosomes:
                for m, p in zip(c.markers, c.positions):
                    w.writerow([m, c.name, _fmt(p)])


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class F2Cross:
    """Marker genotypes and phenotypes for ``n`` F2 individuals."""

    map: GeneticMap
    genotypes: np.ndarray
    phenotypes: np.ndarray
    trait_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.genotypes = np.asarray(self.genotypes, dtype=np.int8)
        self.phenotypes = np.asarray(self.phenotypes, dtype=float)
        if self.phenotypes.ndim == 1:
            self.phenotypes = self.phenotypes[:, None]
        n, m = self.genotypes.shape
        if m != self.map.n_markers:
            raise InvalidInputError(f"{m} genotype columns for {self.map.n_markers} markers")
        if self.phenotypes.shape[0] != n:
            raise InvalidInputError("phenotype and genotype row counts differ")
        if not np.all(np.isfinite(self.phenotypes)):
            raise InvalidInputError("phenotypes contain non-finite values")
        if not np.all(np.isin(self.genotypes, (MISSING, AA, AB, BB))):
            raise InvalidInputError("genotypes must be coded -1, 0, 1 or 2")
        if not self.trait_names:
            self.trait_names = [f"Y{t + 1}" for t in range(self.phenotypes.shape[1])]
        if len(self.trait_names) != self.phenotypes.shape[1]:
            raise InvalidInputError("one trait name per phenotype column required")
        for c, sl in zip(self.map.chromosomes, self.map.marker_slices()):
            empty = np.all(self.genotypes[:, sl] == MISSING, axis=1)
            if empty.any():
                logger.warning(
                    "%d individual(s) have no genotyped markers on chromosome %s",
                    int(empty.sum()),
                    c.name,
                )

    @property
    def n_individuals(self) -> int:
        return self.genotypes.shape[0]

    @property
    def n_traits(self) -> int:
        return self.phenotypes.shape[1]

    def marker_genotypes(self, chromosome: str, position: float) -> np.ndarray:
        return self.genotypes[:, self.map.marker_index(chromosome, position)]

    # -- rotated cross CSV --------------------------------------------------

    def write_csv(self, path, float_format: str = "%.10g") -> None:
        """Write the cross in the names / chromosome / position preamble layout."""
        markers = self.map.marker_names
        chroms = [c.name for c in self.map.chromosomes for _ in c.markers]
        pos = [_fmt(p) for c in self.map.chromosomes for p in c.positions]
        T = self.n_traits
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.trait_names) + markers)
            w.writerow([""] * T + chroms)
            w.writerow([""] * T + pos)
            for i in range(self.n_individuals):
                w.writerow(
                    [float_format % v for v in self.phenotypes[i]]
                    + [_LETTER_OF[int(g)] for g in self.genotypes[i]]
                )

    @classmethod
    def read_csv(cls, path, genetic_map: GeneticMap | None = None) -> F2Cross:
        """Read a cross CSV; individuals with any missing phenotype are dropped.

        When ``genetic_map`` is given its positions override the preamble.
        """
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 3:
            raise InvalidInputError(f"{path}: expected a header and two preamble rows")
        header, chrom_row, pos_row = rows[0], rows[1], rows[2]
        n_traits = 0
        while n_traits < len(header) and chrom_row[n_traits].strip() == "":
            n_traits += 1
        if n_traits == 0 or n_traits == len(header):
            raise InvalidInputError(f"{path}: cannot separate phenotype and marker columns")
        markers = [h.strip() for h in header[n_traits:]]
        if genetic_map is None:
            by_chrom: dict[str, list[tuple[float, str]]] = {}
            for m, c, p in zip(markers, chrom_row[n_traits:], pos_row[n_traits:]):
                by_chrom.setdefault(c.strip(), []).append((float(p), m))
            genetic_map = GeneticMap(
                tuple(
                    Chromosome(
                        c,
                        tuple(m for _, m in sorted(v, key=lambda e: e[0])),
                        np.array(sorted(p for p, _ in v)),
                    )
                    for c, v in by_chrom.items()
                )
            )
        col_of = {m: j for j, m in enumerate(markers)}
        try:
            order = [col_of[m] for m in genetic_map.marker_names]
        except KeyError as exc:
            raise InvalidInputError(f"marker {exc.args[0]} in map but not in cross") from None

        pheno, geno, dropped = [], [], 0
        for lineno, row in enumerate(rows[3:], start=4):
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise InvalidInputError(f"{path}:{lineno}: expected {len(header)} fields")
            raw = [cell.strip() for cell in row[:n_traits]]
            if any(v in _MISSING_PHENO for v in raw):
                dropped += 1
                continue
            try:
                pheno.append([float(v) for v in raw])
                letters = row[n_traits:]
                geno.append([GENOTYPE_LETTERS[letters[j].strip() or "-"] for j in order])
            except (ValueError, KeyError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: bad value {exc}") from None
        if dropped:
            logger.info("dropped %d individual(s) with missing phenotypes", dropped)
        if not pheno:
            raise InvalidInputError(f"{path}: no complete individuals")
        return cls(
            genetic_map,
            np.array(geno, dtype=np.int8),
            np.array(pheno, dtype=float),
            [h.strip() for h in header[:n_traits]],
        )


@dataclass(frozen=True)
class GenoProbTable:
    """Posterior QTL genotype probabilities on a per-chromosome position grid.

    ``probs`` has shape ``(n, G, 3)`` where ``G`` is the total number of grid
    positions over all chromosomes, stored chromosome by chromosome.
    """

    chromosome_names: tuple[str, ...]
    grids: tuple[np.ndarray, ...]
    probs: np.ndarray
    error_rate: float = 0.0

    def __post_init__(self):
        total = sum(len(g) for g in self.grids)
        if self.probs.ndim != 3 or self.probs.shape[1:] != (total, 3):
            raise InvalidInputError(f"probs shape {self.probs.shape} inconsistent with grid")

    @property
    def n_individuals(self) -> int:
        return self.probs.shape[0]

    @property
    def n_positions(self) -> int:
        return self.probs.shape[1]

    @cached_property
    def chromosome_index(self) -> np.ndarray:
        return np.concatenate([np.full(len(g), k) for k, g in enumerate(self.grids)])

    @cached_property
    def positions(self) -> np.ndarray:
        return np.concatenate(self.grids)

    @cached_property
    def additive(self) -> np.ndarray:
        """Expected number of B alleles, shape ``(n, G)``."""
        return self.probs[:, :, 1] + 2.0 * self.probs[:, :, 2]

    @cached_property
    def dominance(self) -> np.ndarray:
        """Probability of the heterozygote, shape ``(n, G)``."""
        return self.probs[:, :, 1]

    def chromosome_slice(self, name: str) -> slice:
        start = 0
        for c, g in zip(self.chromosome_names, self.grids):
            if c == str(name):
                return slice(start, start + len(g))
            start += len(g)
        raise InvalidInputError(f"unknown chromosome {name!r}")

    def locate(self, chromosome: str, position: float, tol: float = 1e-6) -> int:
        """Flat grid index of ``position`` on ``chromosome``."""
        sl = self.chromosome_slice(chromosome)
        hits = np.flatnonzero(np.abs(self.positions[sl] - position) <= tol)
        if hits.size == 0:
            raise InvalidInputError(f"{chromosome}@{position} cM is not a grid position")
        return sl.start + int(hits[0])

    def subset(self, rows) -> GenoProbTable:
        return GenoProbTable(self.chromosome_names, self.grids, self.probs[rows], self.error_rate)


def simulate_f2_genotypes(genetic_map: GeneticMap, n: int, seed=None) -> np.ndarray:
    """Simulate ``n`` F2 individuals under Haldane recombination.

    Each individual receives two independent gametes; along a chromosome a
    gamete's allele switches between adjacent markers with probability
    ``haldane(d)``.
    """
    if genetic_map is None or genetic_map.n_markers == 0:
        raise InvalidInputError("empty genetic map")
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = np.random.default_rng(seed)
    blocks = []
    for chrom in genetic_map.chromosomes:
        r = haldane(np.diff(chrom.positions))
        m = len(chrom.positions)
        gametes = np.empty((2, n, m), dtype=np.int8)
        gametes[:, :, 0] = rng.integers(0, 2, size=(2, n))
        if m > 1:
            flips = rng.random((2, n, m - 1)) < r
            gametes[:, :, 1:] = (gametes[:, :, :1] + np.cumsum(flips, axis=2)) % 2
        blocks.append(gametes[0] + gametes[1])
    return np.concatenate(blocks, axis=1).astype(np.int8)


def _emissions(genotypes: np.ndarray, error_rate: float) -> np.ndarray:
    """Per-individual emission vectors, shape ``(n, 3)``; missing gives ones."""
    n = genotypes.shape[0]
    e = np.ones((n, 3))
    obs = genotypes != MISSING
    if obs.any():
        rows = np.flatnonzero(obs)
        e[rows] = error_rate / 2.0
        e[rows, genotypes[rows]] = 1.0 - error_rate
    return e


def _grid_for(positions: np.ndarray, step: float) -> np.ndarray:
    lo, hi = float(positions[0]), float(positions[-1])
    if step > 0:
        extra = np.arange(lo, hi + 1e-9, step)
        pts = np.concatenate([positions, extra])
    else:
        pts = positions
    pts = np.sort(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-9])
    return pts[keep]


def genoprob_chromosome(
    genotypes: np.ndarray,
    marker_positions: np.ndarray,
    grid: np.ndarray,
    error_rate: float = 0.0,
) -> np.ndarray:
    """Forward-backward genotype posteriors for one chromosome.

    ``genotypes`` is ``(n, m)``; returns ``(n, len(grid), 3)``.
    """
    marker_positions = np.asarray(marker_positions, dtype=float)
    grid = np.asarray(grid, dtype=float)
    n = genotypes.shape[0]
    # Loci: every marker plus every grid point not on a marker; stable order
    # keeps co-located markers adjacent with r = 0.
    pseudo = [g for g in grid if not np.any(np.abs(marker_positions - g) <= 1e-9)]
    loc_pos = np.concatenate([marker_positions, np.asarray(pseudo, dtype=float)])
    loc_marker = np.concatenate([np.arange(len(marker_positions)), np.full(len(pseudo), -1)])
    order = np.argsort(loc_pos, kind="stable")
    loc_pos, loc_marker = loc_pos[order], loc_marker[order]
    K = len(loc_pos)

    emis = np.empty((K, n, 3))
    for k in range(K):
        j = loc_marker[k]
        emis[k] = 1.0 if j < 0 else _emissions(genotypes[:, j], error_rate)
    trans = [f2_transition(float(haldane(d))) for d in np.diff(loc_pos)]

    alpha = np.empty((K, n, 3))
    a = F2_PRIOR * emis[0]
    alpha[0] = a / _norm(a)
    for k in range(1, K):
        a = (alpha[k - 1] @ trans[k - 1]) * emis[k]
        alpha[k] = a / _norm(a)
    beta = np.ones((n, 3))
    post = np.empty((K, n, 3))
    post[K - 1] = alpha[K - 1]
    for k in range(K - 2, -1, -1):
        beta = (emis[k + 1] * beta) @ trans[k].T
        beta = beta / _norm(beta)
        p = alpha[k] * beta
        post[k] = p / _norm(p)

    out = np.empty((n, len(grid), 3))
    for gi, g in enumerate(grid):
        k = int(np.flatnonzero(np.abs(loc_pos - g) <= 1e-9)[0])
        out[:, gi] = post[k]
    return out


def _norm(a: np.ndarray) -> np.ndarray:
    s = a.sum(axis=-1, keepdims=True)
    if np.any(s <= 0):
        raise DegenerateInputError("genotype data impossible under the error model (use error_rate > 0)")
    return s


def calc_genoprob(cross: F2Cross, step: float = 2.0, error_rate: float = 1e-4) -> GenoProbTable:
    """QTL genotype probabilities given all markers on each chromosome.

    The grid on each chromosome spans first to last marker in ``step`` cM
    increments and always includes the markers; ``step=0`` means markers only.
    """
    if step < 0:
        raise InvalidInputError("step must be >= 0")
    if not 0.0 <= error_rate < 0.5:
        raise InvalidInputError("error_rate must lie in [0, 0.5)")
    grids, blocks = [], []
    for chrom, sl in zip(cross.map.chromosomes, cross.map.marker_slices()):
        grid = _grid_for(chrom.positions, step)
        grids.append(grid)
        blocks.append(genoprob_chromosome(cross.genotypes[:, sl], chrom.positions, grid, error_rate))
    return GenoProbTable(
        tuple(cross.map.chromosome_names),
        tuple(grids),
        np.concatenate(blocks, axis=1),
        float(error_rate),
    )


def genotype_table(genetic_map: GeneticMap, genotypes: np.ndarray) -> GenoProbTable:
    """Indicator probabilities at the markers for fully observed genotypes."""
    genotypes = np.asarray(genotypes)
    if np.any(genotypes == MISSING):
        raise InvalidInputError("genotype_table needs complete genotypes; use calc_genoprob")
    grids = []
    for chrom in genetic_map.chromosomes:
        grids.append(_grid_for(chrom.positions, 0.0))
    cols = []
    for chrom, sl in zip(genetic_map.chromosomes, genetic_map.marker_slices()):
        g = genotypes[:, sl]
        _, first = np.unique(chrom.positions, return_index=True)
        cols.append(g[:, first])
    codes = np.concatenate(cols, axis=1)
    probs = np.eye(3)[codes]
    return GenoProbTable(tuple(genetic_map.chromosome_names), tuple(grids), probs, 0.0)


def format_locus(chromosome: str, position: float) -> str:
    return f"{chromosome}@{position:.1f}"
