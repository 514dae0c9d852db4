import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=75,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

# Experiment drivers in scripts/ double as test helpers.
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "scripts"))
