"""Optimal ex ante persuasive signaling in Bayesian network congestion games."""

from __future__ import annotations

from .errors import CapExceededError, ConvergenceError, GameFormatError, UnsupportedGameError
from .game import (
    AffineCost,
    Edge,
    GameInstance,
    Graph,
    SignalingScheme,
    enumerate_paths,
    expected_social_cost,
    make_scheme,
    parse_game,
    parse_scheme,
    serialize_game,
    serialize_scheme,
)
from .solver import (
    NotPersuasive,
    Persuasive,
    SolveReport,
    brute_force_solve,
    cutting_plane_solve,
    verify_persuasive,
)

__all__ = [
    "AffineCost",
    "CapExceededError",
    "ConvergenceError",
    "Edge",
    "GameFormatError",
    "GameInstance",
    "Graph",
    "NotPersuasive",
    "Persuasive",
    "SignalingScheme",
    "SolveReport",
    "UnsupportedGameError",
    "brute_force_solve",
    "cutting_plane_solve",
    "enumerate_paths",
    "expected_social_cost",
    "make_scheme",
    "parse_game",
    "parse_scheme",
    "serialize_game",
    "serialize_scheme",
    "verify_persuasive",
]
