"""Mixing values, ergodic averages and growth statistics over a tower.

Every functional here reduces to counting shifted level indices, so each
result is a certified :class:`~r1lab.numeric.Enclosure` (or an exact
rational).  Sets are always unions of levels; arbitrary measurable sets are
out of scope since levels generate the measure algebra.

Sign conventions are kept explicit because the averaged quantities come in
two directions: :func:`level_profile` averages ``chi_B o T^{-s}`` (so a
point of level ``j`` looks *down* to level ``j - s``), while
:func:`weak_average` and :func:`absolute_average` use forward images
``T^{s}(A)``.  Callers that need the other direction negate their offsets.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dynseq import SeqStats, window_sums
from .numeric import Enclosure, RationalLike, as_rational
from .tower import LevelSet, Tower


def _pair_classes(firsts: np.ndarray, seconds: np.ndarray) -> dict[tuple[int, int], int]:
    """Histogram {(first, second): count} over aligned integer arrays."""
    pairs, counts = np.unique(
        np.stack([firsts, seconds]), axis=1, return_counts=True
    )
    return {
        (int(c), int(e)): int(n)
        for (c, e), n in zip(pairs.T.tolist(), counts.tolist())
    }


def _check_offsets(tower: Tower, offsets: Sequence[int]) -> tuple[int, ...]:
    offs = tuple(int(s) for s in offsets)
    if not offs:
        raise ValueError("need at least one offset")
    h = tower.top_height
    for s in offs:
        if abs(s) >= h:
            raise ValueError(f"offset {s} out of range; |offset| must be < {h}")
    return offs


def mixing_value(tower: Tower, a: LevelSet, b: LevelSet, m: int) -> Enclosure:
    """Certified ``mu(T^m(A) & B) - mu(A) mu(B)``."""
    product = tower.measure(a) * tower.measure(b)
    return tower.image_measure(a, b, m) - product


def mixing_profile(
    tower: Tower, a: LevelSet, b: LevelSet, m_list: Sequence[int]
) -> list[tuple[int, Enclosure]]:
    """One mixing value per shift, sharing one refinement of A and B."""
    h = tower.top_height
    am = tower.refine(a).mask
    bm = tower.refine(b).mask
    product = tower.measure(a) * tower.measure(b)
    rows = []
    for m in m_list:
        if abs(m) >= h:
            raise ValueError(f"shift {m} out of range; deepen the tower")
        if m >= 0:
            resolved = ((am << m) & bm).bit_count()
            unresolved = (am >> (h - m)).bit_count() if m else 0
        else:
            resolved = ((am >> -m) & bm).bit_count()
            unresolved = (am & ((1 << -m) - 1)).bit_count()
        enc = Enclosure(Fraction(resolved, h), Fraction(resolved + unresolved, h))
        rows.append((m, enc - product))
    return rows


@dataclass(frozen=True)
class LevelProfile:
    """The moving average ``(1/r) sum_i chi_B o T^{-s_i}`` as a level function.

    The average is constant on levels of the deepest column; ``hits[j]``
    counts offsets whose shift from level ``j`` lands inside B and
    ``escapes[j]`` counts shifts that leave the column, so the certified
    value at level ``j`` is ``[hits, hits + escapes] / r``.
    """

    stage: int
    height: int
    offsets: tuple[int, ...]
    hits: np.ndarray
    escapes: np.ndarray

    @property
    def terms(self) -> int:
        return len(self.offsets)

    def value_at(self, level: int) -> Enclosure:
        r = self.terms
        c = int(self.hits[level])
        e = int(self.escapes[level])
        return Enclosure(Fraction(c, r), Fraction(c + e, r))

    def classes(self) -> dict[tuple[int, int], int]:
        """Histogram {(hits, escapes): level count}; exact-arithmetic
        aggregation then touches each class only once."""
        return _pair_classes(self.hits, self.escapes)

    def lower_split(self, threshold: RationalLike) -> tuple[LevelSet, LevelSet]:
        """Levels with certified value >= threshold, and the rest.

        Classification uses the certified lower bound, so levels whose value
        is blurred by an escape band land in the second set unless even
        their lower bound clears the threshold.
        """
        t = as_rational(threshold)
        r = self.terms
        ge = self.hits * t.denominator >= t.numerator * r
        mask = int.from_bytes(
            np.packbits(ge, bitorder="little").tobytes(), "little"
        )
        plus = LevelSet(self.stage, self.height, mask)
        minus = LevelSet(self.stage, self.height, ((1 << self.height) - 1) ^ mask)
        return plus, minus


def level_profile(tower: Tower, b: LevelSet, offsets: Sequence[int]) -> LevelProfile:
    """Profile of the average of ``chi_B o T^{-s}`` over the given offsets."""
    offs = _check_offsets(tower, offsets)
    h = tower.top_height
    bbits = tower.refine(b).bits().astype(np.int64)
    hits = np.zeros(h, dtype=np.int64)
    escapes = np.zeros(h, dtype=np.int64)
    for s in offs:
        if s > 0:
            hits[s:] += bbits[: h - s]
            escapes[:s] += 1
        elif s < 0:
            hits[: h + s] += bbits[-s:]
            escapes[h + s :] += 1
        else:
            hits += bbits
    return LevelProfile(tower.depth, h, offs, hits, escapes)


def functional_moment(
    profile: LevelProfile, q: int, target: RationalLike
) -> Enclosure:
    """Certified ``integral of |profile - target|^q`` for ``q`` in {1, 2}.

    The integral is over the normalized column measure, so each level
    weighs ``1/height``.
    """
    if q not in (1, 2):
        raise ValueError("q must be 1 or 2")
    t = as_rational(target)
    r = profile.terms
    h = profile.height
    total = Enclosure.exact(0)
    for (c, e), levels in sorted(profile.classes().items()):
        value = Enclosure(Fraction(c, r), Fraction(c + e, r)) - t
        value = abs(value)
        if q == 2:
            value = value.squared()
        total = total + value.scale(Fraction(levels, h))
    return total


def pairwise_moment(
    tower: Tower, b: LevelSet, offsets: Sequence[int]
) -> Enclosure:
    """The squared moment written as a double sum of shifted intersections.

    ``(1/r^2) sum_{i,j} mu(T^{s_i - s_j}(B) & B) - mu(B)^2`` equals the
    ``q = 2`` moment of the level profile whenever every shift is resolved;
    in general the two enclosures overlap around the same true value.
    """
    offs = _check_offsets(tower, offsets)
    r = len(offs)
    mu_b = tower.measure(b)
    diff_counts = Counter(si - sj for si in offs for sj in offs)
    acc = Enclosure.exact(0)
    for diff, count in sorted(diff_counts.items()):
        acc = acc + tower.image_measure(b, b, diff).scale(count)
    return acc.scale(Fraction(1, r * r)) - mu_b * mu_b


def weak_average(
    tower: Tower, a: LevelSet, b: LevelSet, offsets: Sequence[int]
) -> Enclosure:
    """``(1/r) sum_i mu(T^{s_i}(A) & B) - mu(A) mu(B)`` (forward images)."""
    offs = _check_offsets(tower, offsets)
    acc = Enclosure.sum(tower.image_measure(a, b, s) for s in offs)
    product = tower.measure(a) * tower.measure(b)
    return acc.scale(Fraction(1, len(offs))) - product


def absolute_average(
    tower: Tower,
    a_list: Sequence[LevelSet],
    b: LevelSet,
    offsets: Sequence[int],
) -> Enclosure:
    """``(1/r) sum_i |mu(T^{s_i}(A_i) & B) - mu(A_i) mu(B)|``.

    ``a_list`` is either a single set used for every term or one set per
    offset.
    """
    offs = _check_offsets(tower, offsets)
    if len(a_list) == 1:
        sets = [a_list[0]] * len(offs)
    elif len(a_list) == len(offs):
        sets = list(a_list)
    else:
        raise ValueError("a_list must have one set, or one per offset")
    mu_b = tower.measure(b)
    terms = []
    for a_i, s in zip(sets, offs):
        product = tower.measure(a_i) * mu_b
        terms.append(abs(tower.image_measure(a_i, b, s) - product))
    return Enclosure.sum(terms).scale(Fraction(1, len(offs)))


@dataclass(frozen=True)
class SweepRow:
    window: int
    window_fraction: Fraction
    value: Enclosure


def uniform_ergodicity_sweep(
    tower: Tower,
    stage: int,
    b: LevelSet,
    k_list: Sequence[int],
    seq_values: Optional[Sequence[int]] = None,
) -> list[SweepRow]:
    """Squared-moment table over window lengths of the stage offsets.

    Row ``k`` replaces the stage-``stage`` offsets (the spacer values by
    default) with their length-``k`` window sums and reports the certified
    ``q = 2`` moment against ``mu(B)``; ``k = 0`` keeps the offsets as they
    are.  Rows report ``k / r`` so tables across stages align on the window
    fraction.  This is a finite table, not a limit verdict.
    """
    values = (
        tuple(seq_values)
        if seq_values is not None
        else tower.spacers.values[stage]
    )
    r = len(values)
    mu_b = tower.measure(b)
    rows = []
    for k in k_list:
        if not 0 <= k < r:
            raise ValueError(f"window {k} must satisfy 0 <= k < {r}")
        offsets = values if k == 0 else window_sums(values, k)
        moment = functional_moment(
            level_profile(tower, b, offsets), 2, mu_b
        )
        rows.append(SweepRow(k, Fraction(k, r), moment))
    return rows


def _ancestor_sums(
    anc: np.ndarray, weights: np.ndarray, levels: int
) -> np.ndarray:
    """Sum ``weights`` over deepest-stage indices grouped by ancestor level."""
    out = np.zeros(levels, dtype=np.int64)
    sel = anc >= 0
    np.add.at(out, anc[sel], weights[sel])
    return out


def uniform_mixing_sum(
    tower: Tower, b: LevelSet, m: int, margin: int = 2
) -> Enclosure:
    """Sum over all levels of one column of the absolute mixing values.

    The column stage ``p`` is fixed by ``h_p <= m < h_{p+1}``; the sum is
    ``sum_j |mu(T^m(I_{p,j}) & B) - mu(I_{p,j}) mu(B)|`` with every level
    refined to the deepest stage.  ``margin`` extra stages above ``p`` keep
    the unresolved mass small.
    """
    heights = tower.heights
    if m < heights[0] or m >= tower.top_height:
        raise ValueError(
            f"shift {m} out of range [{heights[0]}, {tower.top_height})"
        )
    p = max(n for n in range(tower.depth + 1) if heights[n] <= m)
    if p + margin > tower.depth:
        raise ValueError(
            f"shift {m} needs column stage {p} + margin {margin}; deepen the tower"
        )
    h = tower.top_height
    anc = tower.ancestor_levels(p)
    bbits = tower.refine(b).bits().astype(np.int64)
    hit = np.zeros(h, dtype=np.int64)
    hit[: h - m] = bbits[m:]
    out_band = np.zeros(h, dtype=np.int64)
    out_band[h - m :] = 1
    hits = _ancestor_sums(anc, hit, heights[p])
    outs = _ancestor_sums(anc, out_band, heights[p])
    mu_level = Fraction(tower.sublevels_per_level(p), h)
    target = mu_level * tower.measure(b)
    total = Enclosure.exact(0)
    for (c, e), levels in sorted(_pair_classes(hits, outs).items()):
        enc = Enclosure(Fraction(c, h), Fraction(c + e, h)) - target
        total = total + abs(enc).scale(levels)
    return total


def ergodic_level_sum(
    tower: Tower,
    offsets: Sequence[int],
    b: LevelSet,
    p: int,
    margin: int = 2,
) -> Enclosure:
    """Riemann-sum form of the ergodic average over the stage-``p`` levels.

    ``sum_j |(1/r) sum_i mu(T^{-s_i}(I_{p,j}) & B) - mu(I_{p,j}) mu(B)|``;
    grouping the averages by level makes this a Riemann sum for the L1
    moment of the matching profile, which therefore dominates it.
    """
    if p + margin > tower.depth:
        raise ValueError(f"stage {p} + margin {margin} exceeds depth {tower.depth}")
    offs = _check_offsets(tower, offsets)
    profile = level_profile(tower, b, offs)
    h = tower.top_height
    anc = tower.ancestor_levels(p)
    hits = _ancestor_sums(anc, profile.hits, tower.heights[p])
    outs = _ancestor_sums(anc, profile.escapes, tower.heights[p])
    r = len(offs)
    mu_level = Fraction(tower.sublevels_per_level(p), h)
    target = mu_level * tower.measure(b)
    total = Enclosure.exact(0)
    for (c, e), levels in sorted(_pair_classes(hits, outs).items()):
        enc = Enclosure(Fraction(c, r * h), Fraction(c + e, r * h)) - target
        total = total + abs(enc).scale(levels)
    return total


def restricted_growth_stat(
    stats: SeqStats, heights: Sequence[int], kappa: RationalLike
) -> list[Fraction]:
    """Per-stage peak of recentred window sums relative to the height.

    Stage ``n`` reports ``max |rep window sum| / h_n`` over window lengths
    ``1 <= k <= floor(kappa * r_n)``; the construction has restricted
    growth exactly when this statistic vanishes along the stages.
    """
    kap = as_rational(kappa)
    if not 0 < kap < 1:
        raise ValueError("kappa must lie in (0, 1)")
    out = []
    for n, rep_stage in enumerate(stats.representative.values):
        r = len(rep_stage)
        k_max = int(kap * r)
        peak = 0
        for k in range(1, k_max + 1):
            sums = window_sums(rep_stage, k)
            if sums:
                peak = max(peak, max(abs(v) for v in sums))
        out.append(Fraction(peak, heights[n]))
    return out


@dataclass(frozen=True)
class ResidualReport:
    residual: Enclosure
    bound: Fraction
    passed: bool


def height_mixing_residual(
    tower: Tower, n: int, a: LevelSet, b: LevelSet, margin: int = 2,
    windowed: bool = False,
) -> ResidualReport:
    """Gap between the height-``n`` mixing value and the spacer average.

    The mixing value at shift ``h_n`` should match the weak average over the
    negated stage-``n`` spacers up to ``2 mu(S_n) + 2 / r_n``; the check
    asserts the certified residual does not exceed that bound.  With
    ``windowed=True`` the shift is the window height ``w_n`` and the offsets
    are the negated recentred spacers; the bound is the same.
    """
    if n + margin > tower.depth:
        raise ValueError(f"stage {n} + margin {margin} exceeds depth {tower.depth}")
    if a.stage > n or b.stage > n:
        raise ValueError("A and B must be unions of levels of stage <= n")
    if windowed:
        shift = tower.window_heights[n]
        offsets = [-s for s in tower.stats.representative.values[n]]
    else:
        shift = tower.heights[n]
        offsets = [-s for s in tower.spacers.values[n]]
    mv = mixing_value(tower, a, b, shift)
    wa = weak_average(tower, a, b, offsets)
    residual = abs(mv - wa)
    bound = 2 * tower.spacer_measure(n) + Fraction(2, tower.cuts[n])
    return ResidualReport(residual, bound, residual.lo <= bound)


@dataclass(frozen=True)
class TimeDecomposition:
    """``t = multiplier * w_stage + remainder`` with ``w_stage <= t < w_{stage+1}``."""

    t: int
    stage: int
    multiplier: int
    remainder: int
    in_regime: bool  # multiplier < r_stage; large times eventually all are


def decompose_time(tower: Tower, t: int) -> TimeDecomposition:
    """Canonical window-height decomposition of a time ``t``."""
    w = tower.window_heights
    if len(w) < 2:
        raise ValueError("decomposition needs at least two stages")
    if t < w[1]:
        raise ValueError(f"t={t} below first usable window height {w[1]}")
    if t >= w[-1]:
        raise ValueError(f"t={t} at or beyond window height {w[-1]}; deepen the tower")
    p = max(n for n in range(len(w)) if w[n] <= t)
    k, q = divmod(t, w[p])
    return TimeDecomposition(t, p, k, q, 0 < k < tower.cuts[p])


def double_ergodicity_search(
    tower: Tower, a: LevelSet, b: LevelSet, n_max: int
) -> Optional[int]:
    """Smallest shift with certified ``mu(T^n A & A) > 0`` and ``mu(T^n A & B) > 0``.

    Returns None when no shift up to ``n_max`` certifies both; every shift
    in range was examined.
    """
    if tower.measure(a) == 0 or tower.measure(b) == 0:
        raise ValueError("A and B must have positive measure")
    if n_max >= tower.top_height:
        raise ValueError("n_max must be below the top height; deepen the tower")
    h = tower.top_height
    am = tower.refine(a).mask
    bm = tower.refine(b).mask
    for n in range(1, n_max + 1):
        shifted = am << n
        if (shifted & am).bit_count() > 0 and (shifted & bm).bit_count() > 0:
            return n
    return None


@dataclass(frozen=True)
class BlockCheck:
    lhs: Enclosure
    rhs: Enclosure
    slack: Fraction
    passed: bool


def block_average_check(
    tower: Tower, b: LevelSet, big_run: int, blocks: int, stride: int
) -> BlockCheck:
    """Consecutive ergodic averages against strided block averages.

    The L1 moment over ``big_run`` consecutive shifts is at most the moment
    over ``blocks`` shifts of ``stride`` plus ``stride * blocks / big_run``;
    the check compares the certified bounds.
    """
    if min(big_run, blocks, stride) < 1:
        raise ValueError("big_run, blocks and stride must be positive")
    mu_b = tower.measure(b)
    lhs = functional_moment(
        level_profile(tower, b, range(big_run)), 1, mu_b
    )
    rhs = functional_moment(
        level_profile(tower, b, [i * stride for i in range(blocks)]), 1, mu_b
    )
    slack = Fraction(stride * blocks, big_run)
    return BlockCheck(lhs, rhs, slack, lhs.lo <= rhs.hi + slack)
