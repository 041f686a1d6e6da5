"""Radial solver and verification suite for a nonlocal Chern-Simons-Higgs system."""
