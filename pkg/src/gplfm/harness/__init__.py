"""Scenario runner: excitation generation, simulation, estimation, reports."""

from .config import RunConfig, load_config, parse_config
from .excitation import generate_excitation
from .runner import (
    run_diagnose,
    run_estimate,
    run_experiment,
    run_lcurve,
    run_optimize,
    run_simulate,
)
from .series import TimeSeries, read_csv, write_csv, write_long_csv, write_series_csv
from .simulate import sensor_channel_names, simulate_response
