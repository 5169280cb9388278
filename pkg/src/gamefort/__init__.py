"""Two-prover one-round games: exact values, expander concatenation,
biregularization, ordered fortification and parallel repetition checks."""

from gamefort._enum import DEFAULT_CAP, InstanceTooLarge
from gamefort.bireg import biregularize, biregularize_graphical, quantize_distribution
from gamefort.concat import (
    ConcatenatedGame,
    FortificationReport,
    combinatorial_fortification_check,
    concatenate,
    concatenate_multiplayer,
    fortification_violation,
    induce_substrategy,
    multiplayer_violation,
    pointwise_bound_check,
)
from gamefort.expanders import (
    BipartiteExpander,
    BipartiteGraph,
    certify,
    complete_graph,
    normalized_adjacency,
    random_biregular_expander,
    second_singular_value,
    shift_union_graph,
)
from gamefort.games import (
    Game,
    KPlayerGame,
    Substrategy,
    chsh,
    classical_value,
    is_biregular,
    kplayer_value,
    parity_game,
    subgame,
    substrategy_value,
    tensor,
    tensor_power,
)
from gamefort.harness import (
    gap_amplification_plan,
    repetition_bound_check,
    run_pipeline,
    step_bound_check,
)
from gamefort.ordered import (
    build_injection_family,
    disjoint_union,
    ordered_fortify,
    tilde_lift,
    verify_tilde_spectral_claim,
)
