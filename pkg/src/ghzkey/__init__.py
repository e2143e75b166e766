"""Three-player quantum game key distribution: exact simulation and checks."""

from ghzkey.state import (
    LABELS,
    PLAYERS,
    EntanglementConfig,
    PayoffMatrix,
    StrategyTriple,
    evolve,
    expected_payoffs_oracle,
    final_state,
    initial_state,
    measurement_basis,
    outcome_distribution,
    payoff_operator,
    sample_outcome,
    strategy_unitary,
)

__all__ = [
    "LABELS",
    "PLAYERS",
    "EntanglementConfig",
    "PayoffMatrix",
    "StrategyTriple",
    "evolve",
    "expected_payoffs_oracle",
    "final_state",
    "initial_state",
    "measurement_basis",
    "outcome_distribution",
    "payoff_operator",
    "sample_outcome",
    "strategy_unitary",
]

__version__ = "0.1.0"
