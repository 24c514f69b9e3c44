"""
PICNIQ command-line interface
Reproducible, seeded experiments over the toolkit's file formats.
"""

__version__ = "1.0.0"
