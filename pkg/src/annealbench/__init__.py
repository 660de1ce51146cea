"""Exact-cover annealing benchmarks: spectra, quench order parameters and schedules."""

__version__ = "0.1.0"

from .spin_core import SpinInstance  # noqa: E402
from .instance_gen import GeneratorConfig, generate_usa_instance  # noqa: E402

__all__ = ["SpinInstance", "GeneratorConfig", "generate_usa_instance", "__version__"]
