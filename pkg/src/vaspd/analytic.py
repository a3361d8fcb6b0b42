"""Closed-form detection rates, error rates, alarm criteria and bounds.

These functions are the oracle against which the Monte Carlo engine is
checked, and the data source for the bound/tradeoff curve exports in the CLI.
All of them are pure functions over immutable inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    AttenuationPair,
    Criterion,
    DETECTOR_STATES,
    Level,
    LevelPairing,
    LinkParams,
    PolarizationState,
    ResponseProbabilities,
    SourceParams,
    StateResponseTable,
    Status,
    Verdict,
    detector_basis,
)


class AnalyticDomainError(ValueError):
    """An input lies outside the domain of a closed-form expression."""


class UndefinedQberError(AnalyticDomainError):
    """A QBER is requested for a configuration that produces no clicks."""


@dataclass(frozen=True)
class CriteriaThresholds:
    """Secure-region boundaries for the rate ratio and the per-level QBERs."""

    ratio_low: float = 1.0
    ratio_high: float = 2.0
    e_th: float = 0.11

    def __post_init__(self) -> None:
        if not self.ratio_low < self.ratio_high:
            raise ValueError("ratio_low must be < ratio_high")
        if not 0.0 < self.e_th < 0.5:
            raise ValueError("e_th must be in (0, 0.5)")


def attenuation_factor(value_db: float, exact_half: bool = True) -> float:
    """Optical power transmission factor of an attenuator setting.

    With ``exact_half`` (the default) 3 dB is treated as an exact factor of
    one half, i.e. 2**(-dB/3); otherwise the dB-exact 10**(-dB/10) is used.
    The closed forms in this module all assume the exact halving.
    """
    if value_db < 0:
        raise AnalyticDomainError("attenuation must be non-negative")
    if exact_half:
        return 2.0 ** (-value_db / 3.0)
    return 10.0 ** (-value_db / 10.0)


def detection_rate(mu: float, eta: float, y0: float) -> float:
    """Click probability per pulse for a Poissonian source over a lossy link."""
    if mu < 0 or not 0.0 <= eta <= 1.0 or not 0.0 <= y0 < 1.0:
        raise AnalyticDomainError(
            f"require mu >= 0, 0 <= eta <= 1, 0 <= y0 < 1; got {mu}, {eta}, {y0}"
        )
    return 1.0 - (1.0 - y0) * math.exp(-mu * eta)


def normal_ratio(
    source: SourceParams,
    link: LinkParams,
    pair: AttenuationPair = AttenuationPair(),
    exact_half: bool = True,
) -> float:
    """Ratio of the low- and high-attenuation detection rates in normal operation.

    For the default (0, 3) dB pair the result lies strictly in (1, 2).
    """
    r_low = detection_rate(
        source.mu, link.eta * attenuation_factor(pair.low_db, exact_half), link.y0
    )
    r_high = detection_rate(
        source.mu, link.eta * attenuation_factor(pair.high_db, exact_half), link.y0
    )
    if r_high == 0.0:
        raise ZeroDivisionError("high-attenuation rate is 0 (y0 = 0 and mu*eta = 0)")
    return r_low / r_high


def attacked_rates(resp: ResponseProbabilities) -> tuple[float, float]:
    """Per-level detection rates of one detector under a trigger-pulse attack.

    The attacker picks each basis with probability 1/2, so a detector sees
    full power in a quarter of the rounds and half power in half of them.
    """
    r0 = 0.25 * resp.p_f0 + 0.5 * resp.p_h0
    r3 = 0.25 * resp.p_f3 + 0.5 * resp.p_h3
    return r0, r3


def attacked_qbers(
    resp: ResponseProbabilities, pairing: LevelPairing
) -> tuple[float, float]:
    """Per-level QBERs under attack, for same or opposite attenuator pairing.

    Half-power rounds put both detectors of the basis in play; a lone wrong
    click is an error, a double click contributes a random bit. Results lie
    in [0, 0.5].
    """
    if pairing is LevelPairing.SAME:
        num0 = 2.0 * resp.p_h0 - resp.p_h0**2
        num3 = 2.0 * resp.p_h3 - resp.p_h3**2
    else:
        cross = resp.p_h0 * resp.p_h3
        num0 = 2.0 * resp.p_h0 - cross
        num3 = 2.0 * resp.p_h3 - cross
    den0 = 2.0 * resp.p_f0 + 2.0 * num0
    den3 = 2.0 * resp.p_f3 + 2.0 * num3
    if den0 == 0.0 or den3 == 0.0:
        raise UndefinedQberError("no clicks at one level; QBER undefined")
    return num0 / den0, num3 / den3


def criteria_verdict(
    r0: float,
    r3: float,
    e0: float,
    e3: float,
    th: CriteriaThresholds = CriteriaThresholds(),
) -> Verdict:
    """Point-estimate secure/alarm decision from rates and QBERs.

    Secure iff ratio_low < r0/r3 < ratio_high and both QBERs are strictly
    below the threshold; otherwise every violated criterion is listed. The
    interval-aware version lives in :mod:`vaspd.stats`.
    """
    if r3 == 0.0:
        raise ZeroDivisionError("r3 = 0: rate ratio undefined")
    alpha = r0 / r3
    violated = []
    if not alpha > th.ratio_low:
        violated.append(Criterion.RATIO_LOW)
    if not alpha < th.ratio_high:
        violated.append(Criterion.RATIO_HIGH)
    if not e0 < th.e_th:
        violated.append(Criterion.QBER_LOW)
    if not e3 < th.e_th:
        violated.append(Criterion.QBER_HIGH)
    status = Status.ALARM if violated else Status.SECURE
    return Verdict(
        status=status,
        violated=tuple(violated),
        alpha_estimate=alpha,
        qber_estimates={Level.LOW: e0, Level.HIGH: e3},
    )


def impossibility_search(
    e_th: float,
    n_samples: int,
    seed: int,
    pairing: LevelPairing,
    alpha_range: tuple[float, float] = (1.0, 2.0),
) -> Optional[tuple[ResponseProbabilities, float]]:
    """Random search for an attack satisfying both alarm criteria at once.

    Samples the half-power click probabilities uniformly on [0, 1]^2 and the
    rate ratio uniformly on ``alpha_range``, then reconstructs the full-power
    probabilities from the equivalence constraint (p_h0 = p_f3) and the rate
    relation, so every physically valid sample satisfies the ratio criterion
    by construction. Returns the first sample whose QBERs are both below
    ``e_th``, or None: for e_th <= 0.11 and alpha in (1, 2) no such point
    exists.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    lo, hi = alpha_range
    chunk = 1 << 18
    remaining = int(n_samples)
    while remaining > 0:
        n = min(chunk, remaining)
        remaining -= n
        p_h0 = rng.random(n)
        p_h3 = rng.random(n)
        alpha = lo + (hi - lo) * rng.random(n)
        p_f3 = p_h0
        p_f0 = alpha * (p_f3 + 2.0 * p_h3) - 2.0 * p_h0
        r3 = 0.25 * p_f3 + 0.5 * p_h3
        valid = (p_f0 >= 0.0) & (p_f0 <= 1.0) & (r3 > 0.0)
        if pairing is LevelPairing.SAME:
            num0 = 2.0 * p_h0 - p_h0**2
            num3 = 2.0 * p_h3 - p_h3**2
        else:
            cross = p_h0 * p_h3
            num0 = 2.0 * p_h0 - cross
            num3 = 2.0 * p_h3 - cross
        den0 = 2.0 * p_f0 + 2.0 * num0
        den3 = 2.0 * p_f3 + 2.0 * num3
        with np.errstate(divide="ignore", invalid="ignore"):
            e0 = np.where(den0 > 0.0, num0 / den0, np.inf)
            e3 = np.where(den3 > 0.0, num3 / den3, np.inf)
        hit = valid & (e0 < e_th) & (e3 < e_th)
        if hit.any():
            i = int(np.flatnonzero(hit)[0])
            resp = ResponseProbabilities(
                p_f0=float(p_f0[i]),
                p_h0=float(p_h0[i]),
                p_f3=float(p_f3[i]),
                p_h3=float(p_h3[i]),
            )
            return resp, float(alpha[i])
    return None


def ratio_lower_bound(e_th: float, pairing: LevelPairing) -> float:
    """Lower bound of the attacked rate ratio when both QBERs stay below e_th.

    Evaluated at the extreme of the feasible half-power click probability;
    with m = 1/(2 e_th) - 1 the bound exceeds 6.5 for e_th = 0.11 in both
    pairings and grows as the threshold shrinks.
    """
    if not 0.0 < e_th <= 0.11:
        raise AnalyticDomainError("e_th must be in (0, 0.11] for the bound")
    m = 1.0 / (2.0 * e_th) - 1.0
    if pairing is LevelPairing.SAME:
        rad = 1.0 - 1.0 / m
        if rad < 0.0:
            raise AnalyticDomainError("negative radicand in same-pairing bound")
        x = 1.0 - math.sqrt(rad)
        inner = 1.0 - x / m
        if inner < 0.0:
            raise AnalyticDomainError("negative radicand in same-pairing bound")
        return (m * (2.0 * x - x**2) + 2.0 * x) / (x + 2.0 - 2.0 * math.sqrt(inner))
    rad = 16.0 * m**2 - 8.0 * m - 7.0
    if rad < 0.0:
        raise AnalyticDomainError("negative radicand in opposite-pairing bound")
    s = math.sqrt(rad)
    return (4.0 * m**2 + 9.0 * m + m * s) / (8.0 * m + 3.0 - s)


_CLAMP_TOL = 1e-12


def _clamp_unit(x: np.ndarray) -> np.ndarray:
    """Clamp reconstructed probabilities into [0, 1] (tolerance 1e-12)."""
    return np.clip(x, 0.0 - 0.0, 1.0)


def reconstruct_half_low(
    e3: np.ndarray, alpha: float, t_r0: float, pairing: LevelPairing
) -> np.ndarray:
    """Low-attenuation half-power click probability consistent with a target
    high-attenuation QBER, given the rate ratio and the rate product t*R0.

    Solves the QBER relation as a quadratic and takes the root lying in
    [0, 1] (the minus-sign branch; verified against a numeric root finder in
    the test suite). Values outside [0, 1] are clamped to the boundary.
    """
    e3 = np.asarray(e3, dtype=np.float64)
    a = t_r0 / alpha
    if pairing is LevelPairing.SAME:
        base = 1.0 + 4.0 * a * e3 - 2.0 * a
        rad = base**2 + 2.0 * (e3 - 0.5) ** 2 * (8.0 * a - 8.0 * a * a)
        if (rad < -_CLAMP_TOL).any():
            raise AnalyticDomainError("negative radicand in reconstruction")
        p = (base - np.sqrt(np.maximum(rad, 0.0))) / (e3 - 0.5)
    else:
        term = 4.0 * a * e3 - 2.0 * a - 1.0
        rad = term**2 - 4.0 * (e3 - 0.5) ** 2 * (8.0 * a)
        if (rad < -_CLAMP_TOL).any():
            raise AnalyticDomainError("negative radicand in reconstruction")
        p = (2.0 * a + 1.0 - 4.0 * a * e3 - np.sqrt(np.maximum(rad, 0.0))) / (
            1.0 - 2.0 * e3
        )
    return _clamp_unit(p)


def qber_tradeoff(
    e3: np.ndarray,
    alpha: float,
    t_r0: float = 0.75,
    pairing: LevelPairing = LevelPairing.SAME,
) -> np.ndarray:
    """Low-attenuation QBER forced by each high-attenuation QBER on the grid.

    The attacker is assumed to hold the rate ratio at ``alpha`` inside the
    secure region while scaling the overall rate via ``t_r0`` (largest value
    0.75, the default, gives the most favourable curve for the attacker).
    The returned curve shows that both QBERs cannot be small at once.
    """
    if not 1.0 <= alpha <= 2.0:
        raise AnalyticDomainError("alpha must be in [1, 2]")
    if not 0.0 < t_r0 <= 0.75:
        raise AnalyticDomainError("t_r0 must be in (0, 0.75]")
    e3 = np.asarray(e3, dtype=np.float64)
    if ((e3 <= 0.0) | (e3 >= 0.5)).any():
        raise AnalyticDomainError("each e3 must lie in (0, 0.5)")
    p_h0 = reconstruct_half_low(e3, alpha, t_r0, pairing)
    if pairing is LevelPairing.SAME:
        num = 2.0 * p_h0 - p_h0**2
        den = 8.0 * t_r0 - 2.0 * p_h0**2
    else:
        a = t_r0 / alpha
        p_h3 = _clamp_unit(2.0 * a - 0.5 * p_h0)
        cross = p_h0 * p_h3
        num = 2.0 * p_h0 - cross
        den = 8.0 * t_r0 - 2.0 * cross
    return num / den


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of the generalized attenuation-gap feasibility search."""

    equivalence_enforced: bool
    counterexample: Optional[dict]
    n_sampled: int
    n_valid: int

    @property
    def found(self) -> bool:
        return self.counterexample is not None


def xy_gap_feasibility(
    x_db: float,
    y_db: float,
    e_th: float,
    n_samples: int,
    seed: int,
    enforce_equivalence: bool = True,
    alpha_range: tuple[float, float] = (1.0, 2.0),
) -> FeasibilityReport:
    """Search for an attack evading the criteria for a general (x, y) dB pair.

    With the half-power equivalence constraint (half power at x dB equals
    full power at y dB, i.e. the gap is exactly 3 dB) the search finds no
    feasible point. Without it the full-power probability at y dB is sampled
    freely and feasible points exist, so the criteria are specific to the
    3 dB gap. ``n_samples = 0`` returns an empty report.
    """
    if not x_db < y_db:
        raise AnalyticDomainError("require x_db < y_db")
    if e_th > 0.11:
        raise AnalyticDomainError("e_th must be <= 0.11")
    if n_samples == 0:
        return FeasibilityReport(enforce_equivalence, None, 0, 0)
    rng = np.random.Generator(np.random.Philox(key=seed))
    lo, hi = alpha_range
    chunk = 1 << 18
    remaining = int(n_samples)
    sampled = valid_total = 0
    while remaining > 0:
        n = min(chunk, remaining)
        remaining -= n
        sampled += n
        p_hx = rng.random(n)
        p_hy = rng.random(n)
        alpha = lo + (hi - lo) * rng.random(n)
        p_fy = p_hx if enforce_equivalence else rng.random(n)
        p_fx = alpha * (p_fy + 2.0 * p_hy) - 2.0 * p_hx
        valid = (p_fx >= 0.0) & (p_fx <= 1.0)
        valid_total += int(valid.sum())
        num_x = 2.0 * p_hx - p_hx**2
        num_y = 2.0 * p_hy - p_hy**2
        den_x = 2.0 * p_fx + 2.0 * num_x
        den_y = 2.0 * p_fy + 2.0 * num_y
        with np.errstate(divide="ignore", invalid="ignore"):
            e_x = np.where(den_x > 0.0, num_x / den_x, np.inf)
            e_y = np.where(den_y > 0.0, num_y / den_y, np.inf)
        hit = valid & (e_x < e_th) & (e_y < e_th)
        if hit.any():
            i = int(np.flatnonzero(hit)[0])
            counterexample = {
                "p_fx": float(p_fx[i]),
                "p_hx": float(p_hx[i]),
                "p_fy": float(p_fy[i] if np.ndim(p_fy) else p_fy),
                "p_hy": float(p_hy[i]),
                "alpha": float(alpha[i]),
                "e_x": float(e_x[i]),
                "e_y": float(e_y[i]),
            }
            return FeasibilityReport(
                enforce_equivalence, counterexample, sampled, valid_total
            )
    return FeasibilityReport(enforce_equivalence, None, sampled, valid_total)


def response_from_table(table: StateResponseTable, own_bit: int) -> ResponseProbabilities:
    """Reduce a per-state response table to the four attack click probabilities.

    Full power corresponds to the detector's own state, half power to the
    mean over the two conjugate-basis states, and ``wrong_full`` to the
    orthogonal state at low attenuation.
    """
    basis = detector_basis(table.detector_id)
    own = PolarizationState.from_basis_bit(basis, own_bit)
    orth = PolarizationState.from_basis_bit(basis, 1 - own_bit)
    diag = [s for s in DETECTOR_STATES if s.basis is basis.conjugate]
    try:
        p_f0 = table.probability(own, Level.LOW)
        p_f3 = table.probability(own, Level.HIGH)
        p_h0 = (
            table.probability(diag[0], Level.LOW) + table.probability(diag[1], Level.LOW)
        ) / 2.0
        p_h3 = (
            table.probability(diag[0], Level.HIGH)
            + table.probability(diag[1], Level.HIGH)
        ) / 2.0
        wrong = table.probability(orth, Level.LOW)
    except KeyError as exc:
        raise AnalyticDomainError(f"missing table entry: {exc}") from exc
    return ResponseProbabilities(
        p_f0=p_f0, p_h0=p_h0, p_f3=p_f3, p_h3=p_h3, wrong_full=wrong
    )
