"""Bundled problem configs."""
