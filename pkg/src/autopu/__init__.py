"""Auto-ML search over two-step positive-unlabelled learning pipelines."""

__version__ = "0.1.0"
