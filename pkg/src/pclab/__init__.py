"""pclab: Monte Carlo toolkit for doubly stochastic pairwise consensus
dynamics on intervals, boxes, and the unit circle."""

__version__ = "0.1.0"
