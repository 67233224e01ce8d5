"""Experiment runner and command-line interface."""
