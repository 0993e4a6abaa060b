"""Calculus of truncated dynamical sequences.

A dynamical sequence is a ragged family of integers ``s[n][i]`` with
``0 <= i < r_n`` over a nondecreasing sequence of cut counts ``r_n``.  This
module derives the stage averages, ranges and recentred representatives,
window partial sums, monotonicity statistics, multiplicity functions and
densities that drive the rest of the library.

Everything here is a pure function over immutable data; statistics are
exact rationals.  Limit-flavoured verdicts are only ever issued for
symbolic cut rules; a finite prefix can never certify a liminf, so explicit
sequences report ``unknown-on-prefix``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

PATHOLOGICAL = "pathological"
NOT_PATHOLOGICAL = "not-pathological"
UNKNOWN_ON_PREFIX = "unknown-on-prefix"


@dataclass(frozen=True)
class CutRule:
    """Explicit or symbolic rule for the cut count ``r_n`` at each stage.

    Symbolic kinds (``constant``, ``affine``, ``doubling-minus-two``) decide
    whether the cut sequence has a finite limit point; explicit lists cannot.
    The doubling rule is ``r_n = 2*(2**n - 1)`` for ``n >= 1`` with ``r_0``
    adjusted to 2, since the formula gives 0 at stage 0.
    """

    kind: str
    values: tuple[int, ...] = ()
    a: int = 0
    b: int = 0

    KINDS = ("explicit", "constant", "affine", "doubling-minus-two")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown cut rule kind {self.kind!r}")
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if self.kind == "explicit":
            if not all(v >= 1 for v in self.values):
                raise ValueError("explicit cuts must all be >= 1")
        elif self.kind == "constant":
            if self.b < 1:
                raise ValueError("constant cut value must be >= 1")
        elif self.kind == "affine":
            if self.a < 1 or self.b < 1:
                raise ValueError("affine cuts a*n+b require a >= 1 and b >= 1")

    @classmethod
    def explicit(cls, values: Sequence[int]) -> "CutRule":
        return cls("explicit", values=tuple(values))

    @classmethod
    def constant(cls, value: int) -> "CutRule":
        return cls("constant", b=value)

    @classmethod
    def affine(cls, a: int, b: int) -> "CutRule":
        return cls("affine", a=a, b=b)

    @classmethod
    def doubling_minus_two(cls) -> "CutRule":
        return cls("doubling-minus-two")

    @property
    def is_symbolic(self) -> bool:
        return self.kind != "explicit"

    def cut(self, n: int) -> int:
        if n < 0:
            raise ValueError("stage must be nonnegative")
        if self.kind == "explicit":
            if n >= len(self.values):
                raise ValueError(f"explicit cut rule has no stage {n}")
            return self.values[n]
        if self.kind == "constant":
            return self.b
        if self.kind == "affine":
            return self.a * n + self.b
        return 2 if n == 0 else 2 * (2**n - 1)

    def cuts(self, depth: int) -> tuple[int, ...]:
        return tuple(self.cut(n) for n in range(depth))

    def pathology(self) -> str:
        """Whether the cut sequence has a finite limit point.

        Decidable for symbolic rules only; explicit prefixes are honest and
        answer ``unknown-on-prefix``.
        """
        if self.kind == "constant":
            return PATHOLOGICAL
        if self.kind in ("affine", "doubling-minus-two"):
            return NOT_PATHOLOGICAL
        return UNKNOWN_ON_PREFIX

    def to_json(self) -> dict:
        if self.kind == "explicit":
            return {"kind": "explicit", "values": list(self.values)}
        if self.kind == "constant":
            return {"kind": "constant", "value": self.b}
        if self.kind == "affine":
            return {"kind": "affine", "a": self.a, "b": self.b}
        return {"kind": "doubling-minus-two"}


def pathology_verdict(rule: CutRule) -> str:
    """Classify a cut rule; see :meth:`CutRule.pathology`."""
    return rule.pathology()


@dataclass(frozen=True)
class DynSeq:
    """A depth-``N`` truncated dynamical sequence.

    ``values[n]`` holds the stage-``n`` entries, one per cut, so
    ``len(values[n]) == cuts[n]``.  Cuts must be nondecreasing unless the
    instance is explicitly flagged as a non-conformant experiment via
    ``allow_nonmonotone_cuts``.
    """

    cuts: tuple[int, ...]
    values: tuple[tuple[int, ...], ...]
    allow_nonmonotone_cuts: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "cuts", tuple(int(c) for c in self.cuts))
        object.__setattr__(
            self, "values", tuple(tuple(int(v) for v in stage) for stage in self.values)
        )
        if len(self.cuts) != len(self.values):
            raise ValueError("cuts and values must have the same depth")
        for n, (r, stage) in enumerate(zip(self.cuts, self.values)):
            if r < 1:
                raise ValueError(f"stage {n}: cut count must be >= 1")
            if len(stage) != r:
                raise ValueError(f"stage {n}: expected {r} values, got {len(stage)}")
        if not self.allow_nonmonotone_cuts:
            for n in range(1, len(self.cuts)):
                if self.cuts[n] < self.cuts[n - 1]:
                    raise ValueError(
                        f"cuts must be nondecreasing (stage {n}: "
                        f"{self.cuts[n]} < {self.cuts[n - 1]}); pass "
                        "allow_nonmonotone_cuts=True to relax"
                    )

    @classmethod
    def from_stages(
        cls, stages: Sequence[Sequence[int]], allow_nonmonotone_cuts: bool = False
    ) -> "DynSeq":
        values = tuple(tuple(stage) for stage in stages)
        return cls(tuple(len(s) for s in values), values, allow_nonmonotone_cuts)

    @property
    def depth(self) -> int:
        return len(self.cuts)

    def stage(self, n: int) -> tuple[int, ...]:
        return self.values[n]

    @property
    def is_nonnegative(self) -> bool:
        return all(v >= 0 for stage in self.values for v in stage)

    def to_json(self) -> dict:
        data: dict = {"cuts": list(self.cuts), "stages": [list(s) for s in self.values]}
        if self.allow_nonmonotone_cuts:
            data["allow_nonmonotone_cuts"] = True
        return data

    @classmethod
    def from_json(cls, data: dict) -> "DynSeq":
        return cls(
            tuple(data["cuts"]),
            tuple(tuple(s) for s in data["stages"]),
            bool(data.get("allow_nonmonotone_cuts", False)),
        )


@dataclass(frozen=True)
class SeqStats:
    """Derived stage statistics of a dynamical sequence.

    ``averages[n]`` is the floored stage mean, ``ranges[n]`` the stage
    max-min spread, and ``representative`` the sequence recentred by the
    stage averages; its stage means always land in [0, 1).
    """

    averages: tuple[int, ...]
    ranges: tuple[int, ...]
    representative: DynSeq
    pathological_verdict: str = UNKNOWN_ON_PREFIX

    def to_json(self) -> dict:
        return {
            "averages": list(self.averages),
            "ranges": list(self.ranges),
            "representative": self.representative.to_json(),
            "pathological_verdict": self.pathological_verdict,
        }


def derive_stats(seq: DynSeq, rule: Optional[CutRule] = None) -> SeqStats:
    """Stage averages, ranges and the recentred representative sequence.

    The pathology verdict is taken from ``rule`` when a symbolic cut rule is
    supplied; a bare prefix yields ``unknown-on-prefix``.
    """
    averages = []
    ranges = []
    rep_stages = []
    for stage in seq.values:
        avg = sum(stage) // len(stage)
        averages.append(avg)
        ranges.append(max(stage) - min(stage))
        rep_stages.append(tuple(v - avg for v in stage))
    rep = DynSeq(seq.cuts, tuple(rep_stages), seq.allow_nonmonotone_cuts)
    verdict = rule.pathology() if rule is not None else UNKNOWN_ON_PREFIX
    return SeqStats(tuple(averages), tuple(ranges), rep, verdict)


@dataclass(frozen=True)
class PartialSums:
    """Length-``k`` window sums of a dynamical sequence.

    Stage ``n`` keeps ``r_n - k`` windows, the sums ``s[n][i] + ... +
    s[n][i+k-1]`` for ``i + k < r_n``; note the final stage entry is never
    consumed by any window.  Stages with ``r_n <= k`` are dropped and listed
    in ``dropped`` (original stage indices); ``retained`` maps the positions
    of ``seq`` back to the original stages.
    """

    seq: DynSeq
    k: int
    retained: tuple[int, ...]
    dropped: tuple[int, ...]

    @property
    def is_empty(self) -> bool:
        return self.seq.depth == 0


def window_sums(stage: Sequence[int], k: int) -> tuple[int, ...]:
    """Window sums of a single stage; empty when ``k >= len(stage)``."""
    if k < 1:
        raise ValueError("window length k must be >= 1")
    return tuple(sum(stage[i : i + k]) for i in range(len(stage) - k))


def partial_sums(seq: DynSeq, k: int) -> PartialSums:
    """Family member ``k`` of the window partial sums of ``seq``."""
    if k < 1:
        raise ValueError("window length k must be >= 1")
    retained = []
    dropped = []
    cuts = []
    stages = []
    for n, stage in enumerate(seq.values):
        if len(stage) <= k:
            dropped.append(n)
            continue
        retained.append(n)
        cuts.append(len(stage) - k)
        stages.append(window_sums(stage, k))
    out = DynSeq(tuple(cuts), tuple(stages), seq.allow_nonmonotone_cuts)
    return PartialSums(out, k, tuple(retained), tuple(dropped))


@dataclass(frozen=True)
class StageMonotonicity:
    """Per-stage monotonicity report for a fixed threshold ``M``."""

    strictly_increasing: bool
    nondecreasing: bool
    square_stat: Fraction  # fraction of index pairs with |s_i - s_j| < M
    weak_stat: Fraction  # fraction of indices with |s_i| < M


def classify_monotonicity(seq: DynSeq, M: int) -> tuple[StageMonotonicity, ...]:
    """Monotonicity flags plus the exact square and weak statistics.

    The square statistic counts pairs (i, j) with ``|s_i - s_j| < M`` over
    ``r_n**2``; the weak statistic counts indices with ``|s_i| < M`` over
    ``r_n``.  For a strictly increasing stage the square statistic is at
    most ``(2M - 1)/r_n`` because ``|s_i - s_j| >= |i - j|``.
    """
    if M < 1:
        raise ValueError("threshold M must be >= 1")
    reports = []
    for stage in seq.values:
        r = len(stage)
        inc = all(stage[i] < stage[i + 1] for i in range(r - 1))
        nondec = all(stage[i] <= stage[i + 1] for i in range(r - 1))
        mult = Counter(stage)
        pairs = 0
        for v, cv in mult.items():
            for w, cw in mult.items():
                if abs(v - w) < M:
                    pairs += cv * cw
        near_zero = sum(1 for v in stage if abs(v) < M)
        reports.append(
            StageMonotonicity(inc, nondec, Fraction(pairs, r * r), Fraction(near_zero, r))
        )
    return tuple(reports)


def multiplicity(seq: DynSeq, n: int) -> dict[int, int]:
    """Value multiplicities of stage ``n``; counts always sum to ``r_n``."""
    if not 0 <= n < seq.depth:
        raise ValueError(f"stage {n} out of range for depth {seq.depth}")
    return dict(Counter(seq.values[n]))


def is_subsequence(sub: DynSeq, full: DynSeq) -> bool:
    """Multiplicity dominance at every stage and value.

    ``sub`` is a dynamical subsequence of ``full`` when no value occurs more
    often in a stage of ``sub`` than in the same stage of ``full``.
    """
    if sub.depth != full.depth:
        raise ValueError("subsequence check requires matching depths")
    for s_stage, f_stage in zip(sub.values, full.values):
        f_mult = Counter(f_stage)
        s_mult = Counter(s_stage)
        if any(count > f_mult.get(v, 0) for v, count in s_mult.items()):
            return False
    return True


@dataclass(frozen=True)
class TrendSummary:
    """Finite-prefix surrogate for a limit: last, largest and smallest value.

    ``caveat`` is always ``"prefix-only"``: these numbers describe the
    computed prefix and certify nothing about the limit.
    """

    last: Optional[Fraction]
    largest: Optional[Fraction]
    smallest: Optional[Fraction]
    caveat: str = "prefix-only"

    @classmethod
    def of(cls, values: Sequence[Optional[Fraction]]) -> "TrendSummary":
        defined = [v for v in values if v is not None]
        if not defined:
            return cls(None, None, None)
        return cls(defined[-1], max(defined), min(defined))


@dataclass(frozen=True)
class DensityReport:
    """Per-stage densities with prefix-trend summaries.

    ``density[n]`` is ``r_n / range_n`` and ``density_in_z[n]`` is
    ``#distinct / range_n``; both are None on constant stages (range 0).
    ``relative_density`` is ``q_n / r_n`` when a subsequence is supplied.
    """

    density: tuple[Optional[Fraction], ...]
    density_in_z: tuple[Optional[Fraction], ...]
    relative_density: Optional[tuple[Fraction, ...]]
    density_trend: TrendSummary
    density_in_z_trend: TrendSummary
    relative_trend: Optional[TrendSummary]


def densities(seq: DynSeq, sub: Optional[DynSeq] = None) -> DensityReport:
    """Stage densities of ``seq`` (and of ``sub`` relative to ``seq``).

    ``density_in_z <= density`` always, with equality when the stage values
    are distinct.
    """
    dens: list[Optional[Fraction]] = []
    dens_z: list[Optional[Fraction]] = []
    for stage in seq.values:
        spread = max(stage) - min(stage)
        if spread == 0:
            dens.append(None)
            dens_z.append(None)
        else:
            dens.append(Fraction(len(stage), spread))
            dens_z.append(Fraction(len(set(stage)), spread))
    relative: Optional[tuple[Fraction, ...]] = None
    rel_trend: Optional[TrendSummary] = None
    if sub is not None:
        if sub.depth != seq.depth:
            raise ValueError("relative density requires matching depths")
        relative = tuple(
            Fraction(q, r) for q, r in zip(sub.cuts, seq.cuts)
        )
        rel_trend = TrendSummary.of(relative)
    return DensityReport(
        tuple(dens),
        tuple(dens_z),
        relative,
        TrendSummary.of(dens),
        TrendSummary.of(dens_z),
        rel_trend,
    )
