"""
Ensemble evaluation: batch execution and ensemble metrics
"""
