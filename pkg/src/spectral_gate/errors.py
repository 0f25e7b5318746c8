"""Exception hierarchy.

Every error carries the name of the module that raised it so the CLI can
emit a machine-parsable record with provenance.
"""


class SpectralGateError(Exception):
    module = "core"

    def record(self):
        return {"error": type(self).__name__, "module": self.module, "message": str(self)}


class DimensionError(SpectralGateError, ValueError):
    module = "field-core"


class SymbolError(SpectralGateError, ValueError):
    module = "subspace-projections"


class PresetError(SpectralGateError, ValueError):
    module = "physics-catalog"


class LayoutError(SpectralGateError, ValueError):
    module = "physics-catalog"


class CertificateError(SpectralGateError):
    module = "greens-solver"


class SingularModuliError(SpectralGateError):
    module = "greens-solver"


class OracleCapExceeded(SpectralGateError):
    module = "greens-solver"


class GeneralizedSpectrumHit(SpectralGateError):
    """The operator Γ₁LΓ₁ is singular on the E-space at the requested parameters."""

    module = "greens-solver"

    def __init__(self, sigma_min, sigma_max=None):
        self.sigma_min = float(sigma_min)
        self.sigma_max = None if sigma_max is None else float(sigma_max)
        super().__init__(
            f"generalized spectrum hit: smallest singular value {self.sigma_min:.3e}"
            + ("" if sigma_max is None else f" (largest {self.sigma_max:.3e})")
        )

    def record(self):
        rec = super().record()
        rec["sigma_min"] = self.sigma_min
        return rec


class TranslationError(SpectralGateError, ValueError):
    module = "translation-certifier"


class SoundnessViolation(SpectralGateError):
    module = "spectrum-mapper"


class ConfigError(SpectralGateError, ValueError):
    module = "cli-io"
