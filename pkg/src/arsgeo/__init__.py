"""Numerical toolkit for two-dimensional almost-Riemannian structures."""
