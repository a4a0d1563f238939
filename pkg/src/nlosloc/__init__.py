"""Camera-assisted 2D radar localisation of pedestrians hidden between parked vehicles."""

__version__ = "0.1.0"
