# photon_postselect/core/detectors.py

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .utils import ConfigError

Flavor = Literal["resolving", "nonresolving"]

_FLAVOR_CODES = {"r": "resolving", "n": "nonresolving"}


class DetectorModel(BaseModel):
    """
    k-photon detector POVM M_k = sum_{l>=k} Y_l |l><l|.

    A resolving detector clicks iff exactly k photons are absorbed, a
    nonresolving one iff k or more are. The single-photon on/off detector
    is DetectorModel(flavor="nonresolving", k=1).
    """
    model_config = ConfigDict(frozen=True)

    flavor: Flavor
    k: int = Field(..., ge=1, description="Photon threshold; the no-click branch is not a detector.")

    @property
    def resolving(self) -> bool:
        return self.flavor == "resolving"

    def upsilon(self, l: int) -> int:
        return upsilon(self, l)

    def levels(self, max_level: int) -> np.ndarray:
        """Ancilla photon numbers 0..max_level accepted by this detector."""
        if self.resolving:
            return np.array([self.k] if self.k <= max_level else [], dtype=np.int64)
        return np.arange(self.k, max_level + 1, dtype=np.int64)

    @property
    def label(self) -> str:
        return f"{self.flavor[0]}:{self.k}"

    @classmethod
    def parse(cls, text: str) -> "DetectorModel":
        """Parse the CLI spelling `r:K` or `n:K`."""
        code, sep, k_text = text.strip().partition(":")
        if not sep or code.lower() not in _FLAVOR_CODES:
            raise ConfigError(f"detector must be spelled r:K or n:K, got '{text}'")
        try:
            k = int(k_text)
        except ValueError:
            raise ConfigError(f"detector threshold must be an integer, got '{k_text}'") from None
        if k < 1:
            raise ConfigError(f"detector threshold must be >= 1, got {k}")
        return cls(flavor=_FLAVOR_CODES[code.lower()], k=k)


def upsilon(d: DetectorModel, l: int) -> int:
    """Acceptance weight Y_l of detector d for l absorbed photons (0 or 1)."""
    if l < d.k:
        return 0
    if d.resolving:
        return 1 if l == d.k else 0
    return 1


def single_photon_detector() -> DetectorModel:
    return DetectorModel(flavor="nonresolving", k=1)
