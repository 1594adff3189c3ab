"""Shared test configuration (keeps the tests directory importable)."""
