"""Song-mood association from playlist co-occurrence and mood classifiers."""

__version__ = "0.1.0"
