"""Leader-follower formation control of second-order agents with adaptive RBF compensation."""

__version__ = "0.1.0"
