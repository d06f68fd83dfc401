"""Tests for flowdiag."""
