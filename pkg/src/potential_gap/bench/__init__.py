"""Monte Carlo benchmark harness."""

from potential_gap.bench.experiment import (ExperimentSpec, SpecError, Trial, TrialRecord,
                                            read_records, run_experiment, run_trial,
                                            write_results)
from potential_gap.bench.summary import ConfigSummary, format_table, series, summarize, trend

__all__ = [
    "ExperimentSpec", "SpecError", "Trial", "TrialRecord", "read_records", "run_experiment",
    "run_trial", "write_results", "ConfigSummary", "format_table", "series", "summarize", "trend",
]
