"""Numerical laboratories: extension (Knapp sets), convolution densities, Kakeya tubes."""
