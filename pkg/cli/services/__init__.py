"""
Experiment orchestration shared by commands
"""
