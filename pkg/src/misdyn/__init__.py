"""Time-varying Markov chain tooling: temporal parse trees over digraph
sequences, and exact simulation and analysis of Markov influence
systems (piecewise-constant endogenous random walks on the simplex).
"""

__version__ = "0.1.0"
