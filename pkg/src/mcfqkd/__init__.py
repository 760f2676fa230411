"""Space-division-multiplexed QKD over multicore fibre: simulation and finite-key analysis."""

__version__ = "0.1.0"
