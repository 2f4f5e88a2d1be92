"""Frog model with drift on the line and on the integers."""
