"""Secret-key rates for relay-based quantum key distribution with an untrusted relay."""

__version__ = "0.1.0"

from .protocol import RateReport, ScenarioConfig, theorem_certificate  # noqa: E402
from .scenario import ConfigError, load_scenario  # noqa: E402

__all__ = ["ConfigError", "RateReport", "ScenarioConfig", "load_scenario", "theorem_certificate", "__version__"]
