"""Length-fidelity arithmetic, grouped aggregation and paired significance."""

from __future__ import annotations

from collections.abc import Callable, Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import EmptyGroup, LengthMismatch, TooFewPairs, ZeroBaseline, ZeroTarget

EXACT_LIMIT = 12  # enumerate all sign flips up to 2**12 = 4096 assignments


@dataclass(frozen=True)
class LengthMetrics:
    generated_words: int
    target_words: int
    abs_error: int
    apd: float
    ratio: float

    @property
    def over_under(self) -> str:
        if self.generated_words > self.target_words:
            return "over"
        if self.generated_words < self.target_words:
            return "under"
        return "exact"


def length_metrics(generated_words: int, target_words: int) -> LengthMetrics:
    """Absolute error, absolute percentage deviation and length ratio for one output."""
    if target_words < 1:
        raise ZeroTarget(f"target_words must be >= 1, got {target_words}")
    if generated_words < 0:
        raise ValueError(f"generated_words must be >= 0, got {generated_words}")
    err = abs(generated_words - target_words)
    return LengthMetrics(
        generated_words=generated_words,
        target_words=target_words,
        abs_error=err,
        apd=err / target_words,
        ratio=generated_words / target_words,
    )


@dataclass(frozen=True)
class AggregateStats:
    mean: float
    std: float
    n: int
    ddof: int = 0

    def format(self, digits: int = 3) -> str:
        return f"{self.mean:.{digits}f} ± {self.std:.{digits}f}"


def describe(values: Iterable[float], ddof: int = 0) -> AggregateStats:
    """Mean and standard deviation (population by default, ``ddof=1`` for sample)."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptyGroup("cannot aggregate an empty group")
    std = float(arr.std(ddof=ddof)) if arr.size > ddof else 0.0
    return AggregateStats(float(arr.mean()), std, int(arr.size), ddof)


def aggregate(
    items: Iterable[Any],
    by: Callable[[Any], Hashable] | Sequence[str] | None = None,
    value: Callable[[Any], float] | str | None = None,
    ddof: int = 0,
) -> dict[Hashable, AggregateStats]:
    """Group ``items`` and describe each group.

    ``by`` is a key function or a sequence of attribute/key names, e.g.
    ``("endpoint_id", "variant_id")``. ``value`` picks the number to
    aggregate; by default the items are the numbers themselves. Groups come
    back in first-seen order.
    """
    key_fn = _getter(by) if by is not None else (lambda _: ())
    val_fn = _value_getter(value)
    groups: dict[Hashable, list[float]] = {}
    for item in items:
        groups.setdefault(key_fn(item), []).append(val_fn(item))
    return {k: describe(v, ddof) for k, v in groups.items()}


def _field(item: Any, name: str) -> Any:
    if isinstance(item, Mapping):
        return item[name]
    return getattr(item, name)


def _getter(by):
    if callable(by):
        return by
    names = (by,) if isinstance(by, str) else tuple(by)
    return lambda item: tuple(_field(item, n) for n in names)


def _value_getter(value):
    if value is None:
        return float
    if callable(value):
        return value
    return lambda item: float(_field(item, value))


def relative_improvement(candidate_mapd: float, baseline_mapd: float) -> float:
    """Percent reduction of ``candidate_mapd`` relative to ``baseline_mapd``."""
    if baseline_mapd <= 0:
        raise ZeroBaseline(f"baseline MAPD must be > 0, got {baseline_mapd}")
    return 100.0 * (baseline_mapd - candidate_mapd) / baseline_mapd


@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float
    n_pairs: int
    n_resamples: int
    seed: int | None
    exact: bool


def _align(a, b, keys):
    if isinstance(a, Mapping) or isinstance(b, Mapping):
        if not (isinstance(a, Mapping) and isinstance(b, Mapping)):
            raise TypeError("a and b must both be mappings or both be sequences")
        if set(a) != set(b):
            missing = set(a) ^ set(b)
            raise LengthMismatch(f"pairing keys differ: {sorted(map(str, missing))[:5]}")
        order = sorted(a, key=repr)
        return np.array([a[k] for k in order], float), np.array([b[k] for k in order], float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"paired samples differ in length: {a.shape} vs {b.shape}")
    if keys is not None:
        keys = list(keys)
        if len(keys) != len(a):
            raise LengthMismatch("pairing keys must match the sample length")
        if len(set(keys)) != len(keys):
            raise LengthMismatch("pairing keys must be unique")
    return a, b


def paired_significance(
    a: Sequence[float] | Mapping[Hashable, float],
    b: Sequence[float] | Mapping[Hashable, float],
    keys: Sequence[Hashable] | None = None,
    n_resamples: int = 10_000,
    seed: int | None = 0,
) -> SignificanceResult:
    """Two-sided paired sign-flip permutation test on ``a - b``.

    The statistic is the mean paired difference. With at most 12 pairs every
    one of the ``2**n`` sign assignments is enumerated and the p-value is
    exact; above that ``n_resamples`` random assignments are drawn from a
    generator seeded with ``seed`` and the p-value is ``(hits + 1) /
    (n_resamples + 1)``.

    ``a`` and ``b`` may be mappings keyed by the pairing key, e.g.
    ``(target, attempt)``, in which case they are aligned on their keys.
    """
    x, y = _align(a, b, keys)
    n = len(x)
    if n < 2:
        raise TooFewPairs(f"need at least 2 pairs, got {n}")
    d = x - y
    observed = float(d.mean())
    # ties within float noise count as "at least as extreme"
    tol = 1e-12 * max(1.0, float(np.abs(d).max()))

    if n <= EXACT_LIMIT:
        codes = np.arange(2**n, dtype=np.int64)[:, None]
        signs = ((codes >> np.arange(n)) & 1) * 2 - 1
        means = signs @ d / n
        hits = int(np.count_nonzero(np.abs(means) >= abs(observed) - tol))
        p = hits / 2**n
        return SignificanceResult(observed, min(1.0, p), n, 2**n, None, True)

    rng = np.random.default_rng(seed)
    hits = 0
    chunk = max(1, min(n_resamples, 2**22 // n))
    done = 0
    while done < n_resamples:
        m = min(chunk, n_resamples - done)
        signs = rng.integers(0, 2, size=(m, n)) * 2 - 1
        means = signs @ d / n
        hits += int(np.count_nonzero(np.abs(means) >= abs(observed) - tol))
        done += m
    p = (hits + 1) / (n_resamples + 1)
    return SignificanceResult(observed, min(1.0, p), n, n_resamples, seed, False)
