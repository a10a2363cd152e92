"""End-to-end experiment drivers, report writers and the command-line interface."""
from .experiments import (ExperimentReport, blaschke_sample, collapse_study, counterexample_logconcave,
                          rigidity_check, sharpness_sweep)

__all__ = ["ExperimentReport", "blaschke_sample", "collapse_study", "counterexample_logconcave",
           "rigidity_check", "sharpness_sweep"]
