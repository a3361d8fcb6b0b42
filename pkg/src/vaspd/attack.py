"""Eavesdropper strategy models.

A strategy determines, per protocol round, the optical stimulus each of the
receiver's detectors sees. The per-round operations here are the scalar
reference used by the oracle tests; the simulation kernels carry vectorized
and compiled equivalents of the same logic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Union

import numpy as np

from .model import (
    AttenuationPair,
    Basis,
    Level,
    PolarizationState,
    ResponseProbabilities,
    VaPolicy,
)
from .analytic import attenuation_factor


class PowerClass(Enum):
    """Trigger power reaching a detector: full, half, or none."""

    FULL = 0
    HALF = 1
    NONE = 2


class BlindingConfigError(ValueError):
    """The blinding light fails to keep the detector blinded at one level."""


@dataclass(frozen=True)
class NoBlindingStrategy:
    """Trigger-pulse attack without blinding light.

    ``responses`` is either one :class:`ResponseProbabilities` applied to all
    detectors or a mapping detector_id -> response. The attacker measures in
    a random basis (Z with probability ``eve_basis_prob``) and resends a
    classical trigger at fixed power.
    """

    responses: Union[ResponseProbabilities, Mapping[int, ResponseProbabilities]]
    eve_basis_prob: float = 0.5
    require_equivalence: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.eve_basis_prob <= 1.0:
            raise ValueError("eve_basis_prob must be a probability")
        if self.require_equivalence:
            for d in range(4):
                if not self.response_for(d).check_equivalence():
                    raise ValueError(
                        f"detector {d}: p_h0 != p_f3 but equivalence was asserted"
                    )

    def response_for(self, detector_id: int) -> ResponseProbabilities:
        if isinstance(self.responses, ResponseProbabilities):
            return self.responses
        return self.responses[detector_id]


#: Trigger response of a blinded detector under perfect control: full power at
#: low attenuation always clicks, everything weaker never does.
PERFECT_BLINDED_RESPONSE = ResponseProbabilities(
    p_f0=1.0, p_h0=0.0, p_f3=0.0, p_h3=0.0
)


@dataclass(frozen=True)
class BlindingStrategy:
    """Continuous-wave blinding plus trigger pulses.

    The blinding power is modulated by the variable attenuator; every change
    of the attenuation value produces a transient at the detector output that
    yields ``clicks_per_transition`` clicks on average, each carrying an
    error probability of ``transition_error_prob``.
    """

    blinding_power_uw: float = 30.0
    blind_threshold_low_uw: float = 11.0
    blind_threshold_high_uw: float = 50.0
    clicks_per_transition: float = 1.0
    transition_error_prob: float = 0.5
    deterministic_clicks: bool = False
    trigger_response: ResponseProbabilities = field(
        default=PERFECT_BLINDED_RESPONSE
    )
    eve_basis_prob: float = 0.5

    def __post_init__(self) -> None:
        if self.clicks_per_transition < 0:
            raise ValueError("clicks_per_transition must be >= 0")
        if not 0.0 < self.blind_threshold_low_uw < self.blind_threshold_high_uw:
            raise ValueError("thresholds must be positive with low < high")
        if not 0.0 <= self.transition_error_prob <= 1.0:
            raise ValueError("transition_error_prob must be a probability")

    def power_at(self, level: Level, pair: AttenuationPair, exact_half: bool = True) -> float:
        return self.blinding_power_uw * attenuation_factor(
            pair.value_db(level), exact_half
        )

    def is_blinded(self, level: Level, pair: AttenuationPair, exact_half: bool = True) -> bool:
        p = self.power_at(level, pair, exact_half)
        return self.blind_threshold_low_uw <= p <= self.blind_threshold_high_uw


def eve_resend(
    alice_state: PolarizationState,
    rng: np.random.Generator,
    eve_basis_prob: float = 0.5,
) -> tuple[Basis, int]:
    """Measure the incoming state in a random basis and fix the resend bit.

    A matched basis reproduces the sender's bit; a conjugate basis projects
    to a uniformly random bit.
    """
    eve_basis = Basis.Z if rng.random() < eve_basis_prob else Basis.X
    if eve_basis is alice_state.basis:
        eve_bit = alice_state.bit
    else:
        eve_bit = int(rng.random() >= 0.5)
    return eve_basis, eve_bit


def power_at_detector(
    eve_basis: Basis, eve_bit: int, bob_basis: Basis, det_bit: int
) -> PowerClass:
    """Power class a detector sees for one resent trigger pulse.

    Matching bases route the full pulse to the detector carrying the
    attacker's bit; conjugate bases split it in half over both detectors of
    the measured basis.
    """
    if eve_basis is bob_basis:
        return PowerClass.FULL if det_bit == eve_bit else PowerClass.NONE
    return PowerClass.HALF


def click_probability(
    power: PowerClass, level: Level, resp: ResponseProbabilities
) -> float:
    """Click probability for a power class at an attenuation level."""
    if power is PowerClass.FULL:
        return resp.p_f0 if level is Level.LOW else resp.p_f3
    if power is PowerClass.HALF:
        return resp.p_h0 if level is Level.LOW else resp.p_h3
    return resp.wrong_full


@dataclass(frozen=True)
class BlindingRoundEffect:
    blinded: bool
    transition_clicks: int


def blinding_round_effect(
    policy: VaPolicy,
    strategy: BlindingStrategy,
    prev_level: Level,
    cur_level: Level,
    rng: np.random.Generator,
    pair: AttenuationPair = AttenuationPair(),
    exact_half: bool = True,
) -> BlindingRoundEffect:
    """Blinding state and transition clicks for one round of one detector.

    Raises :class:`BlindingConfigError` when the attenuated blinding power at
    the high level drops below the blinding window: the attack would fail
    there, which must be reported rather than silently ignored.
    """
    if strategy.power_at(Level.HIGH, pair, exact_half) < strategy.blind_threshold_low_uw:
        raise BlindingConfigError(
            "blinding power at the high attenuation level falls below the "
            "blinding window; the detector would recover single-photon "
            "sensitivity there"
        )
    blinded = strategy.is_blinded(cur_level, pair, exact_half)
    if prev_level is cur_level:
        clicks = 0
    elif strategy.deterministic_clicks:
        clicks = int(round(strategy.clicks_per_transition))
    else:
        clicks = int(rng.poisson(strategy.clicks_per_transition))
    return BlindingRoundEffect(blinded=blinded, transition_clicks=clicks)
