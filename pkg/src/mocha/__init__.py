"""Real-time motion characterization toolkit."""

__version__ = "0.1.0"
