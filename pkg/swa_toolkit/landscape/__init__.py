"""Loss-landscape probes: interpolation paths and perturbation sharpness."""

from swa_toolkit.landscape.models import PROBE_SKIP_PATTERNS, LossFn, ProbeKind, ProbeResult, ProbeSummary
from swa_toolkit.landscape.probes import interpolate_loss, perturbation_sharpness, write_probe

__all__ = [
    "PROBE_SKIP_PATTERNS",
    "LossFn",
    "ProbeKind",
    "ProbeResult",
    "ProbeSummary",
    "interpolate_loss",
    "perturbation_sharpness",
    "write_probe",
]
