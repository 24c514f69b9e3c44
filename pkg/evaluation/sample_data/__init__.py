"""
Synthetic scene generators for benchmarks and tests.
"""
