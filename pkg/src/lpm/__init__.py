"""Fiber-longitudinal power monitoring with a first-order perturbation estimator."""

__version__ = "0.1.0"
