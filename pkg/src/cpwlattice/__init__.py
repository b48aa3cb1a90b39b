"""Tight-binding and circuit-QED simulator for CPW resonator lattices with transmons."""

__version__ = "0.1.0"
