"""Scenarios, experiment orchestration, plotting and the command-line interface."""
