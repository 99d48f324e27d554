"""Test fixtures (mesh builders)."""
