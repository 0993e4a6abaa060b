"""r1lab: exact laboratory for rank one cutting-and-stacking transformations.

Build a tower from a cut/spacer recipe, then query certified enclosures of
mixing values, ergodic Cesaro averages and growth statistics; everything is
exact rational arithmetic, with unresolved orbit mass reported as interval
width rather than hidden in rounding.
"""

from .numeric import Enclosure, Rational, as_rational, decimal_approx, render_rational
from .dynseq import (
    CutRule,
    DynSeq,
    SeqStats,
    classify_monotonicity,
    densities,
    derive_stats,
    is_subsequence,
    multiplicity,
    partial_sums,
    pathology_verdict,
)
from .constructions import (
    OrnsteinSample,
    Recipe,
    SpacerRule,
    dispersed_differences_event,
    dispersed_differences_probability,
    example52_recipe,
    lag_difference_counts,
    materialize,
    ornstein_sample,
    staircase_spacers,
    zero_spacers,
)
from .tower import BudgetExceededError, IdentityCheckError, LevelSet, Tower
from .analysis import (
    BlockCheck,
    LevelProfile,
    ResidualReport,
    TimeDecomposition,
    absolute_average,
    block_average_check,
    decompose_time,
    double_ergodicity_search,
    ergodic_level_sum,
    functional_moment,
    height_mixing_residual,
    level_profile,
    mixing_profile,
    mixing_value,
    pairwise_moment,
    restricted_growth_stat,
    uniform_ergodicity_sweep,
    uniform_mixing_sum,
    weak_average,
)

__version__ = "0.1.0"
