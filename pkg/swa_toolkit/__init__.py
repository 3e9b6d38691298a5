"""Stochastic weight averaging toolkit: schedules, checkpoint averaging and a desk-scale trainer."""

__version__ = "0.1.0"
