"""Numerics for regularly varying tails, weighted sums, product tails and free convolution."""
