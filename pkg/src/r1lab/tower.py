"""Exact finite-depth cutting-and-stacking engine.

A :class:`Tower` realizes the first ``N`` stages of a rank one construction.
Stage ``n`` is a column of ``h_n`` equal-width levels; the next column cuts
it into ``r_n`` subcolumns, adds ``s[n][i]`` fresh spacer levels above
subcolumn ``i`` and stacks right on top of left, so heights follow
``h_{n+1} = r_n * h_n + sum_i s[n][i]``.

Sets are unions of levels of one stage, held as dense bitmasks over level
indices (:class:`LevelSet`); all set algebra and the shifted-intersection
counting behind the transformation queries are big-integer bit operations.
The map sends level ``j`` to level ``j + 1``, so ``T^m`` is an index shift
whose top (or bottom) ``|m|`` levels are unresolved at finite depth: every
orbit query returns an :class:`~r1lab.numeric.Enclosure`, never a point
estimate.

A geometric realization on the line (exact interval endpoints, deterministic
left-to-right spacer allocation) backs an independent point-orbit oracle for
cross-checking the index kernel.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .constructions import Recipe, RealizedRecipe, materialize
from .dynseq import SeqStats, derive_stats
from .numeric import Enclosure

DEFAULT_MAX_HEIGHT = 1 << 24
MAX_HEIGHT_ENV = "R1LAB_MAX_HEIGHT"


class BudgetExceededError(Exception):
    """Raised when a build would exceed the configured height budget."""


class IdentityCheckError(Exception):
    """A structural identity of the construction failed: a build bug."""


def mask_from_indices(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


def indices_from_mask(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


def runs_from_mask(mask: int) -> list[tuple[int, int]]:
    """Run-length encoding [(start, length), ...] of the set bits."""
    runs = []
    pos = 0
    while mask:
        tz = (mask & -mask).bit_length() - 1
        pos += tz
        mask >>= tz
        ones = ((mask + 1) & -(mask + 1)).bit_length() - 1
        runs.append((pos, ones))
        pos += ones
        mask >>= ones
    return runs


def mask_to_bits(mask: int, height: int) -> np.ndarray:
    """Dense uint8 0/1 array of the mask's low ``height`` bits."""
    nbytes = (height + 7) // 8
    raw = np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:height]


@dataclass(frozen=True)
class LevelSet:
    """A union of levels of one stage, as a bitmask over level indices."""

    stage: int
    height: int
    mask: int

    def __post_init__(self) -> None:
        if self.mask < 0:
            raise ValueError("mask must be nonnegative")
        if self.mask >> self.height:
            raise ValueError(f"mask has bits beyond height {self.height}")

    @classmethod
    def from_indices(cls, stage: int, height: int, indices: Iterable[int]) -> "LevelSet":
        idx = tuple(indices)
        if any(not 0 <= i < height for i in idx):
            raise ValueError(f"indices must lie in [0, {height})")
        return cls(stage, height, mask_from_indices(idx))

    @property
    def count(self) -> int:
        return self.mask.bit_count()

    @property
    def is_empty(self) -> bool:
        return self.mask == 0

    def indices(self) -> tuple[int, ...]:
        return indices_from_mask(self.mask)

    def runs(self) -> list[tuple[int, int]]:
        return runs_from_mask(self.mask)

    def _check_peer(self, other: "LevelSet") -> None:
        if (self.stage, self.height) != (other.stage, other.height):
            raise ValueError("level sets must live on the same stage")

    def union(self, other: "LevelSet") -> "LevelSet":
        self._check_peer(other)
        return LevelSet(self.stage, self.height, self.mask | other.mask)

    def intersection(self, other: "LevelSet") -> "LevelSet":
        self._check_peer(other)
        return LevelSet(self.stage, self.height, self.mask & other.mask)

    def complement(self) -> "LevelSet":
        full = (1 << self.height) - 1
        return LevelSet(self.stage, self.height, full ^ self.mask)

    def bits(self) -> np.ndarray:
        return mask_to_bits(self.mask, self.height)


@dataclass(frozen=True)
class StackingReport:
    """Outcome of the structural identity suite of a built tower."""

    shift_identities: int
    embedding_identities: int
    heights_ok: bool
    window_heights_ok: bool

    @property
    def checked(self) -> int:
        return self.shift_identities + self.embedding_identities


class Tower:
    """Immutable finite-depth realization of a rank one construction.

    All queries are pure; instances may be shared freely between workers.
    Measures are reported in the working probability normalization, i.e.
    divided by the total length of the deepest column, and that total is
    exposed so the normalization is auditable.
    """

    def __init__(self, realized: RealizedRecipe, max_height: int):
        self.realized = realized
        self.recipe = realized.recipe
        self.cuts = realized.cuts
        self.spacers = realized.spacers
        self.sample = realized.sample
        self.warnings = realized.warnings
        self.depth = len(self.cuts)
        self.stats: SeqStats = derive_stats(self.spacers, self.recipe.cuts)

        heights = [1]
        for n, (r, stage) in enumerate(zip(self.cuts, self.spacers.values)):
            nxt = r * heights[-1] + sum(stage)
            if nxt > max_height:
                raise BudgetExceededError(
                    f"stage {n}: height {nxt} exceeds budget {max_height} "
                    f"(override via {MAX_HEIGHT_ENV} or max_height)"
                )
            heights.append(nxt)
        self.heights: tuple[int, ...] = tuple(heights)
        self.window_heights: tuple[int, ...] = tuple(
            h + avg for h, avg in zip(self.heights, self.stats.averages)
        )

        widths = [Fraction(1)]
        for r in self.cuts:
            widths.append(widths[-1] / r)
        self.widths: tuple[Fraction, ...] = tuple(widths)

        offsets = []
        spacer_sets = []
        for n, (r, stage) in enumerate(zip(self.cuts, self.spacers.values)):
            h = self.heights[n]
            offs = []
            acc = 0
            mask = 0
            for i in range(r):
                offs.append(i * h + acc)
                top = offs[i] + h
                mask |= ((1 << stage[i]) - 1) << top
                acc += stage[i]
            offsets.append(tuple(offs))
            spacer_sets.append(LevelSet(n + 1, self.heights[n + 1], mask))
        #: per-stage refinement maps: offset of subcolumn i's bottom level
        #: inside the next column's index space
        self.subcolumn_offsets: tuple[tuple[int, ...], ...] = tuple(offsets)
        self.spacer_sets: tuple[LevelSet, ...] = tuple(spacer_sets)
        self._geometry: Optional[dict] = None

    # -- construction -----------------------------------------------------

    @classmethod
    def build(
        cls,
        recipe: Recipe,
        depth: Optional[int] = None,
        max_height: Optional[int] = None,
    ) -> "Tower":
        if max_height is None:
            max_height = int(os.environ.get(MAX_HEIGHT_ENV, DEFAULT_MAX_HEIGHT))
        return cls(materialize(recipe, depth), max_height)

    def deepened(self, depth: int, max_height: Optional[int] = None) -> "Tower":
        """Rebuild to a new depth; earlier stages are reproduced verbatim."""
        if depth < self.depth:
            raise ValueError("deepened() cannot reduce depth")
        if max_height is None:
            max_height = int(os.environ.get(MAX_HEIGHT_ENV, DEFAULT_MAX_HEIGHT))
        return Tower(materialize(self.recipe, depth), max_height)

    # -- basic measure data ------------------------------------------------

    @property
    def top_height(self) -> int:
        return self.heights[self.depth]

    def column_length(self, stage: Optional[int] = None) -> Fraction:
        """Total length of the stage-``n`` column (nondecreasing in n)."""
        n = self.depth if stage is None else stage
        return self.heights[n] * self.widths[n]

    def sublevels_per_level(self, stage: int) -> int:
        """How many deepest-stage sublevels one stage-``n`` level splits into."""
        count = 1
        for r in self.cuts[stage:]:
            count *= r
        return count

    def level_set(self, stage: int, indices: Iterable[int]) -> LevelSet:
        if not 0 <= stage <= self.depth:
            raise ValueError(f"stage {stage} out of range")
        return LevelSet.from_indices(stage, self.heights[stage], indices)

    def full_level_set(self, stage: Optional[int] = None) -> LevelSet:
        n = self.depth if stage is None else stage
        h = self.heights[n]
        return LevelSet(n, h, (1 << h) - 1)

    def measure(self, ls: LevelSet) -> Fraction:
        """Normalized measure of a level set (probability of the deepest column)."""
        return Fraction(ls.count * self.sublevels_per_level(ls.stage), self.top_height)

    def lebesgue(self, ls: LevelSet) -> Fraction:
        return ls.count * self.widths[ls.stage]

    def spacer_measure(self, n: int) -> Fraction:
        """Normalized measure of the spacer levels added at stage ``n``."""
        if not 0 <= n < self.depth:
            raise ValueError(f"stage {n} out of range")
        total = sum(self.spacers.values[n])
        return Fraction(total * self.sublevels_per_level(n + 1), self.top_height)

    # -- refinement ---------------------------------------------------------

    def refine(self, ls: LevelSet, to_stage: Optional[int] = None) -> LevelSet:
        """Re-express a level set as levels of a deeper stage.

        The point set and its measure are preserved exactly: level ``j``
        splits into one sublevel per subcolumn, at index ``offset_i + j`` of
        the next column.
        """
        target = self.depth if to_stage is None else to_stage
        if target < ls.stage:
            raise ValueError("refine target must not precede the set's stage")
        if target > self.depth:
            raise ValueError(f"stage {target} beyond tower depth {self.depth}")
        mask = ls.mask
        for n in range(ls.stage, target):
            nxt = 0
            for off in self.subcolumn_offsets[n]:
                nxt |= mask << off
            mask = nxt
        return LevelSet(target, self.heights[target], mask)

    # -- transformation queries ---------------------------------------------

    def shift_counts(self, a: LevelSet, b: LevelSet, m: int) -> tuple[int, int]:
        """(resolved, unresolved) level counts behind ``T^m(A) & B``.

        Both sets are refined to the deepest stage; resolved counts indices
        ``j`` of A with ``j + m`` inside B, unresolved counts those pushed
        past the top (or below the bottom for negative ``m``).
        """
        h = self.top_height
        if abs(m) >= h:
            raise ValueError(
                f"|m|={abs(m)} must be < top height {h}; deepen the tower"
            )
        am = self.refine(a).mask
        bm = self.refine(b).mask
        if m >= 0:
            resolved = ((am << m) & bm).bit_count()
            unresolved = (am >> (h - m)).bit_count() if m else 0
        else:
            mm = -m
            resolved = ((am >> mm) & bm).bit_count()
            unresolved = (am & ((1 << mm) - 1)).bit_count()
        return resolved, unresolved

    def image_measure(self, a: LevelSet, b: LevelSet, m: int) -> Enclosure:
        """Certified enclosure of ``mu(T^m(A) & B)`` (normalized measure)."""
        resolved, unresolved = self.shift_counts(a, b, m)
        h = self.top_height
        return Enclosure(Fraction(resolved, h), Fraction(resolved + unresolved, h))

    def ancestor_levels(self, stage: int) -> np.ndarray:
        """Deepest-stage index -> stage-``p`` ancestor level, or -1 for spacers
        added after stage ``p``."""
        if not 0 <= stage <= self.depth:
            raise ValueError(f"stage {stage} out of range")
        arr = np.arange(self.heights[stage], dtype=np.int64)
        for n in range(stage, self.depth):
            parts = []
            for i in range(self.cuts[n]):
                parts.append(arr)
                s = self.spacers.values[n][i]
                if s:
                    parts.append(np.full(s, -1, dtype=np.int64))
            arr = np.concatenate(parts)
        return arr

    # -- structural identity suite -------------------------------------------

    def stacking_identities(self) -> StackingReport:
        """Check the construction's exact identities; raise on any failure.

        Verified per stage: the height recursion and window heights; the
        shift identities (the column map advances a sublevel to the same
        level of the next subcolumn in ``h_n + s[n][i]`` steps, equivalently
        in ``w_n`` steps up to the recentred spacer); and the closed-form
        embedding of sublevel (j, i) at index ``offset_i + j`` of the next
        column, checked against the geometric allocator.
        """
        for n in range(self.depth):
            expect = self.cuts[n] * self.heights[n] + sum(self.spacers.values[n])
            if self.heights[n + 1] != expect:
                raise IdentityCheckError(
                    f"height recursion broken at stage {n}: "
                    f"{self.heights[n + 1]} != {expect}"
                )
        for n in range(self.depth):
            if self.window_heights[n] != self.heights[n] + self.stats.averages[n]:
                raise IdentityCheckError(f"window height broken at stage {n}")

        shift_count = 0
        rep = self.stats.representative.values
        for n in range(self.depth):
            h = self.heights[n]
            offs = self.subcolumn_offsets[n]
            stage = self.spacers.values[n]
            w = self.window_heights[n]
            for i in range(self.cuts[n] - 1):
                step = self.heights[n] + stage[i]
                # same displacement written through the window height and the
                # recentred spacer; checks w_n and the representative values
                window_step = w + rep[n][i]
                for j in range(h):
                    src = offs[i] + j
                    dst = offs[i + 1] + j
                    if src + step != dst:
                        raise IdentityCheckError(
                            f"shift identity failed at stage {n}, level {j}, "
                            f"subcolumn {i}: {src} + {step} != {dst}"
                        )
                    if src + window_step != dst:
                        raise IdentityCheckError(
                            f"window shift identity failed at stage {n}, "
                            f"level {j}, subcolumn {i}"
                        )
                    shift_count += 1

        embed_count = self._check_embedding()
        return StackingReport(shift_count, embed_count, True, True)

    def _check_embedding(self) -> int:
        """Verify allocator geometry against the closed-form sublevel index."""
        checked = 0
        for n, bases, nxt in self._iter_geometry_stages():
            unit = int(self._grid_units(n + 1))
            offs = self.subcolumn_offsets[n]
            h = self.heights[n]
            for i in range(self.cuts[n]):
                expect = bases + i * unit
                got = nxt[offs[i] : offs[i] + h]
                if not np.array_equal(got, expect):
                    bad = int(np.nonzero(got != expect)[0][0])
                    raise IdentityCheckError(
                        f"embedding failed at stage {n}, subcolumn {i}, level {bad}"
                    )
                checked += h
        return checked

    # -- geometric realization ------------------------------------------------

    def _grid_units(self, stage: int) -> int:
        """Cells (deepest-stage widths) spanned by one stage-``n`` level."""
        units = 1
        for r in self.cuts[stage:]:
            units *= r
        return units

    def _iter_geometry_stages(self):
        """Yield (n, bases_n, bases_{n+1}) built via the interval allocator.

        Bases are left endpoints in grid units of the deepest level width.
        The initial column occupies [0, G); each spacer takes the next free
        interval at the right frontier, so the used portion of the line is
        always a prefix of the grid.
        """
        bases = np.zeros(1, dtype=np.int64)
        frontier = self._grid_units(0)
        for n in range(self.depth):
            unit = self._grid_units(n + 1)
            parts = []
            for i in range(self.cuts[n]):
                parts.append(bases + i * unit)
                s = self.spacers.values[n][i]
                if s:
                    parts.append(
                        np.arange(frontier, frontier + s * unit, unit, dtype=np.int64)
                    )
                    frontier += s * unit
            nxt = np.concatenate(parts)
            yield n, bases, nxt
            bases = nxt

    def _geometry_arrays(self) -> dict:
        if self._geometry is None:
            bases = np.zeros(1, dtype=np.int64)
            for _, _, nxt in self._iter_geometry_stages():
                bases = nxt
            h = self.top_height
            if bases.shape[0] != h:
                raise IdentityCheckError("geometry does not cover the column")
            level_of = np.empty(h, dtype=np.int64)
            level_of[bases] = np.arange(h, dtype=np.int64)
            nxt_cell = np.full(h, -1, dtype=np.int64)
            nxt_cell[bases[:-1]] = bases[1:]
            prev_cell = np.full(h, -1, dtype=np.int64)
            prev_cell[bases[1:]] = bases[:-1]
            self._geometry = {
                "bases": bases,
                "level_of_cell": level_of,
                "next_cell": nxt_cell,
                "prev_cell": prev_cell,
            }
        return self._geometry

    def level_bases(self, stage: Optional[int] = None) -> tuple[Fraction, ...]:
        """Exact left endpoints of the levels, bottom to top.

        Computed lazily from the grid geometry; the deepest stage comes from
        the cache, earlier stages replay the allocator.
        """
        n = self.depth if stage is None else stage
        grid = self.widths[self.depth]
        if n == self.depth:
            bases = self._geometry_arrays()["bases"]
            return tuple(int(b) * grid for b in bases)
        if n == 0:
            return (Fraction(0),)
        for m, _, nxt in self._iter_geometry_stages():
            if m == n - 1:
                return tuple(int(b) * grid for b in nxt)
        raise ValueError(f"stage {n} out of range")

    def locate_point(self, x: Fraction) -> int:
        """Deepest-stage level index containing the point ``x``."""
        x = Fraction(x)
        geo = self._geometry_arrays()
        grid = self.widths[self.depth]
        cell = (x.numerator * grid.denominator) // (x.denominator * grid.numerator)
        if x < 0 or cell >= self.top_height:
            raise ValueError(f"point {x} lies outside the column")
        return int(geo["level_of_cell"][cell])

    def point_orbit(self, x: Fraction, steps: int) -> Optional[Fraction]:
        """Iterate the column map on an exact point of the deepest column.

        Each step translates the point from its level to the one above via
        the difference of interval endpoints.  Returns None when the orbit
        hits the top (or bottom, for negative ``steps``) level before all
        steps are taken: the map is unresolved there at this depth.
        """
        x = Fraction(x)
        geo = self._geometry_arrays()
        grid = self.widths[self.depth]
        cell = (x.numerator * grid.denominator) // (x.denominator * grid.numerator)
        if x < 0 or cell >= self.top_height:
            raise ValueError(f"point {x} lies outside the column")
        offset = x - cell * grid
        hop = geo["next_cell"] if steps >= 0 else geo["prev_cell"]
        for _ in range(abs(steps)):
            nxt = int(hop[cell])
            if nxt < 0:
                return None
            cell = nxt
        return cell * grid + offset

    def orbit_frequencies(
        self, a: LevelSet, b: LevelSet, m: int, points: int, seed: int
    ) -> tuple[Fraction, Fraction]:
        """Monte Carlo estimate of ``mu(T^m(A) & B)`` via the point oracle.

        Samples uniform points of the deepest column, pushes each through
        ``m`` steps of the geometric orbit and counts landings in B.  The
        first fraction counts only orbits that stayed resolved; the second
        also counts points of A whose orbit left the column, and so
        estimates the enclosure's upper bound.
        """
        import random as _random

        if points < 1:
            raise ValueError("points must be >= 1")
        geo = self._geometry_arrays()
        h = self.top_height
        rng = _random.Random(seed)
        cells = np.array([rng.randrange(h) for _ in range(points)], dtype=np.int64)
        level_of = geo["level_of_cell"]
        a_bits = self.refine(a).bits().astype(bool)
        b_bits = self.refine(b).bits().astype(bool)
        in_a = a_bits[level_of[cells]]
        hop = geo["next_cell"] if m >= 0 else geo["prev_cell"]
        alive = np.ones(points, dtype=bool)
        for _ in range(abs(m)):
            cur = cells[alive]
            nxt = hop[cur]
            ok = nxt >= 0
            idx = np.nonzero(alive)[0]
            cells[idx[ok]] = nxt[ok]
            alive[idx[~ok]] = False
        landed = np.zeros(points, dtype=bool)
        landed[alive] = b_bits[level_of[cells[alive]]]
        resolved_hits = int(np.count_nonzero(in_a & alive & landed))
        escaped = int(np.count_nonzero(in_a & ~alive))
        return Fraction(resolved_hits, points), Fraction(resolved_hits + escaped, points)
