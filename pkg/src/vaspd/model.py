"""Domain types shared by the analytic, attack, simulator and stats layers.

Everything here is an immutable value type (frozen dataclasses and enums)
except :class:`TallySet`, which is a mergeable counter container backed by a
numpy array. Validation is report-style: constructors raise only on outright
type misuse, while :func:`~vaspd.simulator.validate` collects invariant
violations as strings.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

import numpy as np


class Basis(Enum):
    """Measurement basis: rectilinear (Z) or diagonal (X)."""

    Z = 0
    X = 1

    @property
    def conjugate(self) -> "Basis":
        return Basis.X if self is Basis.Z else Basis.Z


class PolarizationState(Enum):
    """The four signal states: H/V rectilinear, +/- diagonal (+-45 deg)."""

    H = 0
    V = 1
    PLUS = 2
    MINUS = 3

    @property
    def basis(self) -> Basis:
        return Basis.Z if self in (PolarizationState.H, PolarizationState.V) else Basis.X

    @property
    def bit(self) -> int:
        return 0 if self in (PolarizationState.H, PolarizationState.PLUS) else 1

    @staticmethod
    def from_basis_bit(basis: Basis, bit: int) -> "PolarizationState":
        if basis is Basis.Z:
            return PolarizationState.H if bit == 0 else PolarizationState.V
        return PolarizationState.PLUS if bit == 0 else PolarizationState.MINUS


#: Detector index -> the polarization state it detects. Detectors 0/1 form the
#: Z pair, 2/3 the X pair; even indices carry bit 0, odd indices bit 1.
DETECTOR_STATES = (
    PolarizationState.H,
    PolarizationState.V,
    PolarizationState.PLUS,
    PolarizationState.MINUS,
)


def detector_basis(detector_id: int) -> Basis:
    return Basis.Z if detector_id < 2 else Basis.X


def detector_bit(detector_id: int) -> int:
    return detector_id & 1


class Level(Enum):
    """Attenuator setting: the low or the high attenuation value."""

    LOW = 0
    HIGH = 1


class LevelPairing(Enum):
    """Realized relation between the two attenuators of one basis pair."""

    SAME = 0
    OPPOSITE = 1


class VaDrawMode(Enum):
    """Whether the two detectors of a basis share one attenuation draw."""

    LINKED = "linked"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class AttenuationPair:
    """The (low, high) attenuation values in dB applied by the variable attenuator."""

    low_db: float = 0.0
    high_db: float = 3.0

    def value_db(self, level: Level) -> float:
        return self.low_db if level is Level.LOW else self.high_db


@dataclass(frozen=True)
class SourceParams:
    """Weak coherent pulse source: Poisson mean photon number and pulse rate."""

    mu: float
    pulse_rate: float = 5e6


@dataclass(frozen=True)
class LinkParams:
    """Channel-plus-detector efficiency at low attenuation and background click rate."""

    eta: float
    y0: float = 0.0


@dataclass(frozen=True)
class VaPolicy:
    """Per-round attenuation policy.

    ``p_high`` is the probability of drawing the high value; ``mode`` controls
    whether the two detectors of a basis share a single draw or draw
    independently.
    """

    p_high: float = 0.5
    mode: VaDrawMode = VaDrawMode.LINKED


@dataclass(frozen=True)
class ResponseProbabilities:
    """Click probabilities of one detector under a trigger-pulse attack.

    ``p_f0``/``p_f3`` apply with full incident power at the low/high
    attenuation, ``p_h0``/``p_h3`` with half power. ``wrong_full`` is the
    click probability of the orthogonal matched-basis detector; the closed
    forms neglect it, so it defaults to 0 and only the simulator uses it.
    """

    p_f0: float
    p_h0: float
    p_f3: float
    p_h3: float
    wrong_full: float = 0.0

    def __post_init__(self) -> None:
        for name in ("p_f0", "p_h0", "p_f3", "p_h3", "wrong_full"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.p_f0 < self.p_h0 or self.p_f3 < self.p_h3:
            warnings.warn(
                "superlinearity violated: expected p_f0 >= p_h0 and p_f3 >= p_h3",
                stacklevel=2,
            )

    def check_equivalence(self, tol: float = 1e-9) -> bool:
        """True when p_h0 == p_f3 within ``tol`` (half power at low attenuation
        is equivalent to full power at high attenuation)."""
        return abs(self.p_h0 - self.p_f3) <= tol


@dataclass(frozen=True)
class StateResponseTable:
    """Per-sent-state, per-attenuation click probabilities of one detector."""

    detector_id: int
    entries: dict = field(default_factory=dict)  # (PolarizationState, Level) -> prob

    def __post_init__(self) -> None:
        if len(self.entries) != 8:
            raise ValueError(
                f"expected 8 entries (4 states x 2 levels), got {len(self.entries)}"
            )
        for (state, level), p in self.entries.items():
            if not isinstance(state, PolarizationState) or not isinstance(level, Level):
                raise TypeError(f"bad entry key ({state!r}, {level!r})")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability out of range for {state}/{level}: {p}")

    def probability(self, state: PolarizationState, level: Level) -> float:
        return self.entries[(state, level)]


# TallySet field indices.
SENT, SIFTED, CLICKS, ERRORS, DOUBLE_CLICKS = range(5)
_FIELD_NAMES = ("sent", "sifted", "clicks", "errors", "double_clicks")

N_DETECTORS = 4


class TallySet:
    """Per (detector, own level, realized pairing) event counts.

    Backed by an int64 array of shape (4 detectors, 2 levels, 2 realizations,
    5 fields). Merging two tally sets is field-wise addition, which forms a
    commutative monoid with the all-zero tally as identity.
    """

    SHAPE = (N_DETECTORS, 2, 2, 5)

    def __init__(self, counts: Optional[np.ndarray] = None):
        if counts is None:
            counts = np.zeros(self.SHAPE, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != self.SHAPE:
            raise ValueError(f"counts must have shape {self.SHAPE}, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        self.counts = counts

    def merge(self, other: "TallySet") -> "TallySet":
        return TallySet(self.counts + other.counts)

    __add__ = merge

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TallySet) and bool(
            np.array_equal(self.counts, other.counts)
        )

    def __repr__(self) -> str:
        return f"TallySet(total_sent={int(self.counts[..., SENT].sum())})"

    def stratum(self, detector_id: int, level: Level, realization: LevelPairing) -> np.ndarray:
        return self.counts[detector_id, level.value, realization.value]

    def level_totals(self, level: Level) -> np.ndarray:
        """Counts summed over detectors and realizations for one level."""
        return self.counts[:, level.value, :, :].sum(axis=(0, 1))

    def check_invariants(self) -> list[str]:
        report = []
        c = self.counts
        if (c[..., ERRORS] > c[..., SIFTED]).any():
            report.append("error_count <= sifted_count")
        if (c[..., SIFTED] > c[..., SENT]).any():
            report.append("sifted_count <= sent_count")
        if (c[..., DOUBLE_CLICKS] > c[..., CLICKS]).any():
            report.append("double_click_count <= click_count")
        return report

    def iter_strata(self) -> Iterator[tuple[int, Level, LevelPairing, np.ndarray]]:
        for d in range(N_DETECTORS):
            for level in Level:
                for realization in LevelPairing:
                    yield d, level, realization, self.counts[
                        d, level.value, realization.value
                    ]


class Criterion(Enum):
    """Which alarm criterion a verdict found violated."""

    RATIO_LOW = "ratio_low"
    RATIO_HIGH = "ratio_high"
    QBER_LOW = "qber_low"      # QBER at the low attenuation value over threshold
    QBER_HIGH = "qber_high"    # QBER at the high attenuation value over threshold
    BLINDING_CLICKS = "blinding_clicks"


class Status(Enum):
    SECURE = "secure"
    ALARM = "alarm"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Verdict:
    """Alarm decision with the violated criteria and the supporting estimates.

    ``alpha_estimate`` and the per-level ``qber_estimates`` are plain floats
    for the point-estimate verdict and :class:`vaspd.stats.Estimate` objects
    for the interval verdict.
    """

    status: Status
    violated: tuple
    alpha_estimate: object = None
    qber_estimates: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if (self.status is Status.ALARM) != bool(self.violated):
            raise ValueError("status is ALARM iff violated is non-empty")
