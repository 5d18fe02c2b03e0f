"""Capital-flow episodes, stock-index changepoints and their cross-tabulation."""

__version__ = "0.1.0"
