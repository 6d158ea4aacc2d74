"""Voltage sensitivity coefficient estimation (LS, FNN, LSTM)."""

from ._core import (
    ConfigError,
    Grid,
    IoError,
    Measurements,
    NumericError,
    Profiles,
    build_window,
    generate_profiles,
    load_grid,
    ls_estimate,
    ls_sliding,
    parse_grid_json,
    read_measurements_csv,
    read_profiles_csv,
    run_comparison,
    sensitivities,
    simulate,
    solve_loadflow,
    true_coefficients,
)

__all__ = [
    "ConfigError",
    "Grid",
    "IoError",
    "Measurements",
    "NumericError",
    "Profiles",
    "build_window",
    "generate_profiles",
    "load_grid",
    "ls_estimate",
    "ls_sliding",
    "parse_grid_json",
    "read_measurements_csv",
    "read_profiles_csv",
    "run_comparison",
    "sensitivities",
    "simulate",
    "solve_loadflow",
    "true_coefficients",
]
