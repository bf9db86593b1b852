"""Perturbation expansions for transfer operators of Markov shifts."""

__version__ = "0.1.0"
