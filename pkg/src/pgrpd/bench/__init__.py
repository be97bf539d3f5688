"""Benchmark harness: config parsing, sweeps, CSV traces and plots."""

from .config import BenchConfig, load_config, parse_config
from .runner import run_sweep
from .plotting import plot_dir
