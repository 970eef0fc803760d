"""Eco-driving simulation and control at a signalized intersection:
a deterministic microsimulator, an energy meter, a rule/RL hybrid
controller, two baselines, and a scenario-grid evaluation harness."""

__version__ = "0.1.0"
