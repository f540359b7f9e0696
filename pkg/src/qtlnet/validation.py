"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import InvalidInputError
from .genetics import GenoProbTable


def check_phenotypes(Y, min_traits: int = 1) -> tuple[np.ndarray, tuple[str, ...]]:
    """Return a finite float ``(n, T)`` array and trait names.

    Names come from DataFrame columns when available, else ``Y1..YT``.
    """
    names = tuple(str(c) for c in getattr(Y, "columns", ()))
    try:
        arr = check_array(Y, dtype=np.float64, ensure_2d=True, ensure_min_samples=3)
    except ValueError as exc:
        raise InvalidInputError(str(exc)) from None
    if arr.shape[1] < min_traits:
        raise InvalidInputError(f"need at least {min_traits} trait(s)")
    if not names:
        names = tuple(f"Y{t + 1}" for t in range(arr.shape[1]))
    return arr, names


def check_genoprobs(genoprobs, n_individuals: int | None = None, atol: float = 1e-9) -> GenoProbTable:
    if not isinstance(genoprobs, GenoProbTable):
        raise InvalidInputError(f"expected GenoProbTable, got {type(genoprobs).__name__}")
    p = genoprobs.probs
    if n_individuals is not None and p.shape[0] != n_individuals:
        raise InvalidInputError(
            f"genotype probabilities for {p.shape[0]} individuals, phenotypes for {n_individuals}"
        )
    if np.any(p < -atol) or np.any(p > 1 + atol):
        raise InvalidInputError("genotype probabilities outside [0, 1]")
    if not np.allclose(p.sum(axis=2), 1.0, atol=atol):
        raise InvalidInputError("genotype probability triples must sum to 1")
    return genoprobs


def check_trait_sets(trait: int, conditioning, n_traits: int) -> tuple[int, tuple[int, ...]]:
    trait = int(trait)
    cond = tuple(sorted({int(c) for c in conditioning}))
    if not 0 <= trait < n_traits or any(not 0 <= c < n_traits for c in cond):
        raise InvalidInputError(f"trait indices must lie in [0, {n_traits})")
    if trait in cond:
        raise InvalidInputError("trait may not condition on itself")
    return trait, cond
