"""Numerical core: sketches, clustering, CQR solvers, bounds, training, collapse"""
