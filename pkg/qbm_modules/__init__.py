# QBM Lab Modules
# Numerical components of the quantum Brownian motion laboratory

__version__ = "1.0.0"
__author__ = "QBM Lab Developers"
