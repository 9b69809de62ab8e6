"""Equilibrium bi-causal transport for discrete processes with time-inconsistent costs."""
