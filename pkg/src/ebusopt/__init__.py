"""Charging-location, electric-bus scheduling and charge-scheduling optimizer."""
__version__ = "0.1.0"
