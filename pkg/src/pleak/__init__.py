"""Privacy leakage analysis for process models with SQL-annotated tasks."""

__version__ = "0.1.0"
