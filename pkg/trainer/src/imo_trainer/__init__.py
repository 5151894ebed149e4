"""Training side of the displacement network: dataset windowing from the
simulator CSV layout, a torch model mirroring the inference engine, and
weight export in the shared interchange JSON format."""

__version__ = "0.1.0"
