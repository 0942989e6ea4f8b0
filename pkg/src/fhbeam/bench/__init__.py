"""Experiment runner reproducing the convergence, inner-loop and antenna-sweep studies."""

from fhbeam.bench.config import ConfigError, ExperimentSpec, parse_config, parse_text, serialize
from fhbeam.bench.runner import run_experiment
from fhbeam.bench.trace import emit_trace, read_trace, validate_trace
