"""Recurrence-time and match-length statistics of finite-alphabet sources.

A workbench for the exponential tail behaviour of normalized recurrence
times: exact source models, recurrence/match-length scanners, a
shifted-window entropy estimator, Monte Carlo deviation tails with
rate fitting, the exact Cramer rate oracle for iid sources, and the
conditional return-time law checks.
"""

from .sources import (
    IIDSource, MarkovSource, ConstantSource, PeriodicSource, SourceModel,
    ChainClassification, BlockProbability,
    stationary_distribution, classify_chain, entropy_rate, generate,
    generate_past_given_block, time_reversed_transition, block_probability,
    model_from_spec, model_to_spec, load_model, model_id,
    NotIrreducible, ZeroProbability, ModelUnsupported, ModelSpecError,
)
from .recurrence import (
    Realization, RecurrenceOutcome, MatchLengthOutcome,
    recurrence_naive, recurrence_indexed, batched_recurrences,
    exceeds_threshold, match_length, duality_holds,
    dump_realization, load_realization,
    InsufficientPast, Undecidable,
)
from .estimators import (
    QSchedule, EstimateReport, estimate_Jn, estimate_match_dual,
    convergence_sweep, jn_for_model, default_w_max,
    InsufficientData, FLAG_EXACT, FLAG_LOWER_BOUND, FLAG_BIASED,
)
from .ldp import (
    TailEstimate, RateFit, CramerRate, KimResult, KacResult,
    mc_tail_upper, mc_tail_lower, mc_tail_match, mc_tail_aep,
    aep_tail_exact, cramer_rate_iid, aep_rate_anchor, fit_rate,
    kim_check, kac_check, wilson_interval,
    ThresholdTooLarge, EpsilonExceedsEntropy, InsufficientPoints,
    TooLargeToEnumerate, BlockZeroProbability,
)

__version__ = "0.1.0"
