"""Agent trace analytics: task-flow discovery, failure summaries, run variability
and a ground-truth benchmark harness, with a deterministic calculator trace generator."""

__version__ = "0.1.0"
