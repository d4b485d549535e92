"""Regret-minimizing adaptive incentive design.

A planner steers agents with private polynomial costs towards a desired
action profile. It alternates Gaussian probing with certainty-equivalence
incentives while a gated recursive least-squares estimator learns each
agent's type.
"""

__version__ = "0.1.0"
