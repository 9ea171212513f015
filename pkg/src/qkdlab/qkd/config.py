from __future__ import annotations

from dataclasses import asdict, dataclass

PROTOCOLS = ("bb84", "b92", "epr")

# CHSH analyzer angles in degrees; Alice's pair doubles as her key bases
CHSH_A = (0.0, 45.0)
CHSH_B = (22.5, 67.5)


@dataclass(frozen=True)
class ProtocolConfig:
    n_pulses: int = 10_000
    sample_fraction: float = 0.5
    abort_threshold: float = 0.10
    pa_safety: int = 30
    ec_passes: int = 4
    test_fraction: float = 0.5  # EPR only: share of Bob's settings spent on CHSH angles

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if not 0.0 < self.sample_fraction < 1.0:
            raise ValueError("sample_fraction must lie in (0, 1)")
        if not 0.0 < self.abort_threshold < 1.0:
            raise ValueError("abort_threshold must lie in (0, 1)")
        if self.pa_safety < 0:
            raise ValueError("pa_safety must be >= 0")
        if self.ec_passes < 0:
            raise ValueError("ec_passes must be >= 0")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)
