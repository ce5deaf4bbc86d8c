"""Online generalized assignment and fractional knapsack in the random-order model."""

__version__ = "0.1.0"
