"""Mean curvature flow of spacelike graphs: simulator and checks."""

__version__ = "0.1.0"
