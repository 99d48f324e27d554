"""Tests for meshgnn."""
