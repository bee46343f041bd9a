"""Discrete-time finite-state markets: martingale measures, growth-optimal portfolios and information."""
from .errors import *  # noqa: F401,F403
from .gop import (
    GopResult,
    compute_gop,
    law_of_minimal_price_bound,
    martingale_hypothesis_check,
    real_world_value,
    replicate,
    risk_neutral_value,
    verify_numeraire_portfolio,
)
from .market import (
    Claim,
    Market,
    Strategy,
    ValueProcess,
    benchmark,
    buy_and_hold,
    discount,
    normalize,
    strategy_from_units,
    value_process,
)
from .noarb import (
    RNP,
    EmmSet,
    Measure,
    bayes_conditional,
    change_numeraire_measure,
    find_arbitrage,
    find_dominating,
    find_emms,
    is_complete,
    measure_from_density,
    rnp_from_measure,
    verify_deflator,
)
from .probspace import (
    AdaptedProcess,
    Filtration,
    FiniteProbSpace,
    classify_process,
    conditional_expectation,
    is_immersed,
    natural_filtration,
)
from .scenario import emit_scenario, evaluate_claim, generate, load_scenario, parse_scenario
from .sensitivity import Signal, efficiency_check, enlarge, sdf_compatibility, sensitivity_report

__version__ = "0.1.0"
