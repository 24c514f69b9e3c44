"""
Evaluation tools for synthetic PICNIQ benchmarks.

This package contains scripts that exercise the scalers, the pair selection
strategies and the comparator against the Thurstone observer model, where
ground truth is known exactly.
"""

__version__ = "1.0.0"
