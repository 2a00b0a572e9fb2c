"""Scenario-based multi-agent driving curriculum engine."""

__version__ = "0.1.0"
