"""Noise-assisted variational quantum thermalization."""
