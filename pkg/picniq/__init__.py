"""
PICNIQ Toolkit
Pairwise quality preferences, psychometric scaling and JOD quality scores.
"""

__version__ = "1.0.0"
