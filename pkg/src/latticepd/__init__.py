"""Spatial prisoner's dilemma on a diluted lattice with independent Q-learners."""

from .game import PayoffParams, Strategy, pair_payoff, site_payoff
from .lattice import Lattice, build_lattice, neighbors, round_half_up
from .learning import (
    ActionKind,
    ActionSet,
    LearningParams,
    select_action,
    update_q,
    zero_qtable,
)
from .dynamics import (
    SKIPPED,
    Agent,
    World,
    act_copy_best,
    act_move,
    act_persist,
    act_strategy,
    mcs,
    sample_step,
)
from .kernel import ArrayState
from .metrics import (
    action_fractions,
    cooperator_fraction,
    state_action_correlation,
    tail_average,
)
from .harness import (
    CellResult,
    RunResult,
    SimConfig,
    SweepSpec,
    dump_snapshot,
    load_grid,
    run_replicated,
    run_single,
    run_sweep,
    write_results_csv,
    write_series_csv,
)

__version__ = "0.1.0"
