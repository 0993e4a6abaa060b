"""Generators for the named spacer families and random-spacer combinatorics.

A :class:`Recipe` pairs a cut rule with a spacer rule (explicit values,
staircase, zero, seeded random spacers, or the no-restricted-growth
counterexample) and a depth.  :func:`materialize` turns a recipe into the
concrete spacer sequence the tower engine consumes, carrying the raw random
draws alongside so published experiments replay without the generator.

Random draws are keyed per (seed, stage): deepening a construction never
perturbs the stages already generated.
"""

from __future__ import annotations

import hashlib
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dynseq import CutRule, DynSeq, window_sums

SPACER_KINDS = ("explicit", "staircase", "zero", "ornstein", "example52")


def _stage_rng(seed: int, label: str, index: int) -> random.Random:
    """Deterministic RNG stream keyed by (seed, label, index)."""
    digest = hashlib.sha256(f"r1lab:{label}:{seed}:{index}".encode()).digest()
    return random.Random(int.from_bytes(digest, "big"))


@dataclass(frozen=True)
class SpacerRule:
    """Which spacer family to generate, plus its parameters.

    ``explicit`` carries the stage values directly (or a single per-stage
    pattern to repeat, handy for constant-cut constructions such as the
    classic cuts-3 / spacers (0,1,0) example).  ``ornstein`` needs a range
    rule for the per-stage spread and a mandatory seed.
    """

    kind: str
    values: tuple[tuple[int, ...], ...] = ()
    pattern: tuple[int, ...] = ()
    ranges: Optional[CutRule] = None
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in SPACER_KINDS:
            raise ValueError(f"unknown spacer kind {self.kind!r}")
        object.__setattr__(
            self, "values", tuple(tuple(int(v) for v in stage) for stage in self.values)
        )
        object.__setattr__(self, "pattern", tuple(int(v) for v in self.pattern))
        if self.kind == "explicit":
            if bool(self.values) == bool(self.pattern):
                raise ValueError("explicit spacers need exactly one of values/pattern")
        if self.kind == "ornstein":
            if self.ranges is None:
                raise ValueError("ornstein spacers require a ranges rule")
            if self.seed is None:
                raise ValueError("ornstein spacers require a seed")

    @classmethod
    def explicit(cls, values: Sequence[Sequence[int]]) -> "SpacerRule":
        return cls("explicit", values=tuple(tuple(v) for v in values))

    @classmethod
    def from_pattern(cls, pattern: Sequence[int]) -> "SpacerRule":
        return cls("explicit", pattern=tuple(pattern))

    @classmethod
    def staircase(cls) -> "SpacerRule":
        return cls("staircase")

    @classmethod
    def zero(cls) -> "SpacerRule":
        return cls("zero")

    @classmethod
    def ornstein(cls, ranges: CutRule, seed: int) -> "SpacerRule":
        return cls("ornstein", ranges=ranges, seed=seed)

    @classmethod
    def example52(cls) -> "SpacerRule":
        return cls("example52")

    def to_json(self) -> dict:
        if self.kind == "explicit":
            if self.values:
                return {"kind": "explicit", "values": [list(s) for s in self.values]}
            return {"kind": "explicit", "pattern": list(self.pattern)}
        if self.kind == "ornstein":
            assert self.ranges is not None
            return {"kind": "ornstein", "ranges": self.ranges.to_json(), "seed": self.seed}
        return {"kind": self.kind}


@dataclass(frozen=True)
class Recipe:
    """A named cutting-and-stacking recipe: cuts, spacers, depth."""

    name: str
    cuts: CutRule
    spacers: SpacerRule
    depth: int

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "cuts": self.cuts.to_json(),
            "spacers": self.spacers.to_json(),
            "depth": self.depth,
        }


@dataclass(frozen=True)
class OrnsteinSample:
    """One seeded realization of the random-spacer construction.

    Stage ``n`` draws ``x[n][0..r_n-1]`` uniformly from the integers in
    ``[-floor(range_n/2), floor(range_n/2)]`` and sets the spacers to
    ``spread + x[i+1] - x[i]`` with the last index wrapping to ``x[0]``, so
    every stage sums to exactly ``r_n * range_n`` and each value lies in
    ``[0, 2*range_n]``.  Window sums of the recentred sequence telescope to
    single draw differences and are bounded by ``range_n``.
    """

    draws: tuple[tuple[int, ...], ...]
    ranges: tuple[int, ...]
    spacers: DynSeq
    seed: int

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "ranges": list(self.ranges),
            "draws": [list(stage) for stage in self.draws],
        }


def staircase_spacers(cuts: Sequence[int]) -> DynSeq:
    """Stage ``n`` is ``(0, 1, ..., r_n - 1)``."""
    return DynSeq.from_stages([tuple(range(r)) for r in cuts])


def zero_spacers(cuts: Sequence[int]) -> DynSeq:
    return DynSeq.from_stages([(0,) * r for r in cuts])


def spacers_from_draws(draws: Sequence[int], spread: int) -> tuple[int, ...]:
    """Spacer values from one stage of raw draws: ``spread + x[i+1] - x[i]``
    with the final index wrapping to ``x[0]``."""
    r = len(draws)
    return tuple(spread + draws[(i + 1) % r] - draws[i] for i in range(r))


def ornstein_sample(
    cuts: Sequence[int], ranges: Sequence[int], seed: int
) -> OrnsteinSample:
    """Generate random spacers for the given cuts and per-stage spreads.

    Deterministic: the same (cuts, ranges, seed) always reproduces the
    identical sample, stage by stage.
    """
    draws = []
    stages = []
    for n, (r, spread) in enumerate(zip(cuts, ranges)):
        if spread < 1:
            raise ValueError(f"stage {n}: range must be >= 1, got {spread}")
        half = spread // 2
        rng = _stage_rng(seed, "ornstein", n)
        x = tuple(rng.randint(-half, half) for _ in range(r))
        draws.append(x)
        stages.append(spacers_from_draws(x, spread))
    spacers = DynSeq(tuple(cuts), tuple(stages))
    return OrnsteinSample(tuple(draws), tuple(int(s) for s in ranges), spacers, seed)


def example52_recipe(depth: int, name: str = "example52") -> Recipe:
    """The finite-measure construction without restricted growth.

    Cuts follow the doubling rule (stage 0 adjusted to 2) and each stage
    puts a full column height of spacers over the first subcolumn only, so
    the recentred window sums stay comparable to the height forever.
    """
    return Recipe(name, CutRule.doubling_minus_two(), SpacerRule.example52(), depth)


def _example52_spacers(cuts: Sequence[int]) -> DynSeq:
    heights = [1]
    stages = []
    for r in cuts:
        h = heights[-1]
        stage = (h,) + (0,) * (r - 1)
        stages.append(stage)
        heights.append(r * h + h)
    return DynSeq(tuple(cuts), tuple(stages))


@dataclass(frozen=True)
class RealizedRecipe:
    """Concrete cuts and spacer values for a recipe, plus provenance."""

    recipe: Recipe
    cuts: tuple[int, ...]
    spacers: DynSeq
    sample: Optional[OrnsteinSample]
    warnings: tuple[str, ...]


def materialize(recipe: Recipe, depth: Optional[int] = None) -> RealizedRecipe:
    """Generate the spacer sequence a recipe describes.

    ``depth`` overrides the recipe's depth.  Random spacers are checked for
    a plausible finite total measure: when the per-stage ratio of added
    spacer mass to the next height is not settling below 1/2 a warning is
    attached rather than rejecting, since a prefix cannot decide
    summability.
    """
    n = recipe.depth if depth is None else depth
    if n < 0:
        raise ValueError("depth must be nonnegative")
    cuts = recipe.cuts.cuts(n)
    rule = recipe.spacers
    sample = None
    warnings: tuple[str, ...] = ()
    if rule.kind == "staircase":
        spacers = staircase_spacers(cuts)
    elif rule.kind == "zero":
        spacers = zero_spacers(cuts)
    elif rule.kind == "example52":
        spacers = _example52_spacers(cuts)
    elif rule.kind == "explicit":
        values = rule.values if rule.values else tuple(rule.pattern for _ in cuts)
        if len(values) < n:
            raise ValueError(
                f"explicit spacers provide {len(values)} stages, need {n}"
            )
        spacers = DynSeq(cuts, tuple(values[:n]))
    else:  # ornstein
        assert rule.ranges is not None and rule.seed is not None
        ranges = tuple(rule.ranges.cut(z) for z in range(n))
        sample = ornstein_sample(cuts, ranges, rule.seed)
        spacers = sample.spacers
        warnings = _summability_warnings(cuts, spacers)
    if not spacers.is_nonnegative:
        raise ValueError("spacer values must be nonnegative")
    return RealizedRecipe(recipe, cuts, spacers, sample, warnings)


def _summability_warnings(cuts: Sequence[int], spacers: DynSeq) -> tuple[str, ...]:
    heights = [1]
    ratios = []
    for r, stage in zip(cuts, spacers.values):
        total = sum(stage)
        heights.append(r * heights[-1] + total)
        ratios.append(Fraction(total, heights[-1]))
    if not ratios:
        return ()
    tail = ratios[-min(3, len(ratios)) :]
    settling = all(a >= b for a, b in zip(tail, tail[1:]))
    if settling and tail[-1] < Fraction(1, 2):
        return ()
    return (
        "spacer mass ratio sum(s_n)/h_{n+1} is not settling below 1/2 on this "
        f"prefix (last ratios {[str(x) for x in tail]}); the limit space may "
        "have infinite measure",
    )


def lag_difference_counts(x: Sequence[int], lag: int) -> dict[int, int]:
    """Counts of each value of ``x[i+lag] - x[i]``.

    Only indices with both endpoints in range contribute, so the counts sum
    to ``len(x) - lag``.
    """
    m = len(x)
    if not 1 <= lag < m:
        raise ValueError(f"lag must satisfy 1 <= lag < {m}, got {lag}")
    return dict(Counter(x[i + lag] - x[i] for i in range(m - lag)))


def dispersed_differences_event(
    x: Sequence[int], spread: int, alpha: Fraction, eps: Fraction
) -> bool:
    """Whether no lag-difference value is over-represented in ``x``.

    True when for every lag ``k`` up to ``floor((1-eps)*m)`` and every value,
    the count of lag-``k`` differences equal to that value is at most
    ``(alpha/spread) * (m - k)``.  Counting is vectorized but the threshold
    comparison is exact integer arithmetic.
    """
    if spread < 1:
        raise ValueError("spread must be >= 1")
    arr = np.asarray(x, dtype=np.int64)
    m = arr.size
    alpha = Fraction(alpha)
    eps = Fraction(eps)
    k_max = min(int((1 - eps) * m), m - 1)  # Fraction floor via int()
    for k in range(1, k_max + 1):
        diffs = arr[k:] - arr[:-k]
        worst = int(np.bincount(diffs - diffs.min()).max())
        # worst > (alpha/spread)(m - k), cross-multiplied to stay exact
        if worst * spread * alpha.denominator > alpha.numerator * (m - k):
            return False
    return True


def dispersed_differences_probability(
    spread: int,
    m: int,
    alpha: Fraction,
    eps: Fraction,
    trials: int,
    seed: int,
) -> Fraction:
    """Empirical probability of :func:`dispersed_differences_event`.

    Draws ``trials`` independent words of ``m`` integers uniform on
    ``[-floor(spread/2), floor(spread/2)]`` (streams keyed per trial) and
    returns the exact success fraction.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if m < 2:
        raise ValueError("m must be >= 2")
    half = spread // 2
    hits = 0
    for t in range(trials):
        rng = _stage_rng(seed, "dispersal-trial", t)
        x = [rng.randint(-half, half) for _ in range(m)]
        if dispersed_differences_event(x, spread, alpha, eps):
            hits += 1
    return Fraction(hits, trials)
