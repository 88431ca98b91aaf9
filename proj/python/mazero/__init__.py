"""Python bindings for the mazero core library."""

from ._mazero import (
    MazeroError,
    awpo_weights,
    bandit_experiment,
    bandit_t,
    eta_star,
    gridworld_optimal_return,
    keep_count,
    kkt_residual,
    scalar_to_support,
    search_matrix_game,
    top_quantile,
    train,
    v_lambda,
    value_transform,
    value_transform_inv,
    verify,
)

__all__ = [
    "MazeroError",
    "awpo_weights",
    "bandit_experiment",
    "bandit_t",
    "eta_star",
    "gridworld_optimal_return",
    "keep_count",
    "kkt_residual",
    "scalar_to_support",
    "search_matrix_game",
    "top_quantile",
    "train",
    "v_lambda",
    "value_transform",
    "value_transform_inv",
    "verify",
]
