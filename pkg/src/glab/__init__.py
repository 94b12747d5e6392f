"""Computational integral geometry of convex bodies."""
