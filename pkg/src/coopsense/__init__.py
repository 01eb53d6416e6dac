"""Vehicle-road cooperative lidar perception: simulation, fusion and tracking."""

__version__ = "0.1.0"
