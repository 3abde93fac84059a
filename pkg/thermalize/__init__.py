"""
Thermalization laboratory for the transverse-field XY chain
"""
__version__ = "1.0.0"
