"""Joint modelling of irregular clinical observation processes and survival
outcomes, with baselines, a synthetic cohort generator, censoring-adjusted
metrics and a regime-shift robustness harness."""

__version__ = "0.1.0"
