"""Scenario files, result serialization and the command line."""
