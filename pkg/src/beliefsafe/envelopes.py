"""Closed-form opportunity/risk bound envelopes and the adversarial payoff
matrix construction used by the lower bounds.

Envelope evaluation is pure arithmetic with no tolerance knobs; comparing
envelopes against measured values is the caller's business.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .normal_form import (
    HypothesisSet,
    PayoffMatrix,
    TypeIntensityUndefinedError,
    kappa_attaining_pair,
)


@dataclass(frozen=True)
class NfgEnvelope:
    """Normal-form envelope at one trust level: achievable upper bounds on
    opportunity and risk, plus the risk floor forced on any strategy whose
    opportunity is at that upper bound."""

    lam: float
    upper_opportunity: float
    upper_risk: float
    lower_risk_given_opportunity: Optional[float]


@dataclass(frozen=True)
class SbgEnvelope:
    """Stochastic-game envelope at one (gamma, lambda) point."""

    lam: float
    gamma: float
    r_max: float
    nu: float
    C1: float
    C2: float
    C3: float
    C4: float
    upper_opportunity: float
    upper_risk: float
    lower_opportunity: float
    lower_risk: float


def nfg_upper_bound(mu: float, nu: float, eta: float, lam: float) -> Tuple[float, float]:
    """Achievable (opportunity, risk) for the trust-blended strategy:
    ((1-lam)(mu-nu), (1-lam)(mu-nu) + lam*mu*eta)."""
    if nu > mu + 1e-12:
        raise ValueError(f"nu={nu} exceeds mu={mu}")
    if not -1e-12 <= eta <= 2 + 1e-12:
        raise ValueError(f"eta={eta} outside [0, 2]")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    opp = (1.0 - lam) * (mu - nu)
    return opp, opp + lam * mu * eta


def nfg_lower_bound(mu: float, nu: float, kappa: Optional[float], lam: float) -> float:
    """Risk floor (kappa*mu - nu)(1 + lam) forced on any strategy missing at
    most (1-lam)(mu-nu) opportunity on the adversarial instance."""
    if kappa is None:
        raise TypeIntensityUndefinedError(
            "type intensity undefined: the risk floor does not apply"
        )
    if kappa < 0:
        raise ValueError("risk floor requires a nonnegative type intensity")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return (kappa * mu - nu) * (1.0 + lam)


def adversarial_matrix(
    mu: float, nu: float, theta: HypothesisSet, a: int, b: int
) -> PayoffMatrix:
    """Worst-case payoff matrix for a hypothesis set with defined intensity.

    Columns carry the antipodal pattern +/-beta (beta = mu - nu) split by the
    sign structure of the intensity-attaining pair, plus the constant matrix
    of nu. Rows come in the even count the pattern needs; an odd row count is
    padded with a zero row before the constant is added.
    """
    if a < 2:
        raise ValueError("the construction needs at least two rows")
    if mu <= nu:
        raise ValueError("the construction needs mu > nu")
    if theta.dim != b:
        raise ValueError("hypothesis set dimension does not match requested columns")
    i_prime, i_dprime = kappa_attaining_pair(theta)
    y_p = theta.members[i_prime].probs
    y_pp = theta.members[i_dprime].probs

    beta = mu - nu
    pattern_rows = a if a % 2 == 0 else a - 1
    M = np.zeros((a, b))
    for j in range(b):
        col = np.full(pattern_rows, -beta)
        col[0] = beta
        if not y_p[j] > y_pp[j]:
            col = -col
        M[:pattern_rows, j] = col
    return PayoffMatrix(M + nu)


def sbg_constants(gamma: float) -> Tuple[float, float, float, float]:
    """The discount-dependent constants (C1, C2, C3, C4) of the stochastic
    upper bounds, with C2 = max(C3, C4).

    C4 is stated in its source as (2 - 2*gamma^2 + 1) / (1 - gamma)^2; the
    numerator is evaluated literally as 3 - 2*gamma^2 (whether it was meant
    to be something else is unresolved upstream).
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    one_minus = 1.0 - gamma
    c1 = (gamma * gamma - 3.0 * gamma + 6.0) / (one_minus * one_minus)
    c3 = (gamma * gamma - 3.0 * gamma + 2.0) / one_minus
    c4 = (3.0 - 2.0 * gamma * gamma) / (one_minus * one_minus)
    c2 = max(c3, c4)
    return c1, c2, c3, c4


def sbg_envelopes(gamma: float, r_max: float, nu: float, lam: float) -> SbgEnvelope:
    """Upper (achievable) and lower (forced) opportunity/risk envelopes for
    discounted stochastic games with game value at least nu."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    c1, c2, c3, c4 = sbg_constants(gamma)
    denom = 1.0 - lam * gamma
    return SbgEnvelope(
        lam=lam,
        gamma=gamma,
        r_max=r_max,
        nu=nu,
        C1=c1,
        C2=c2,
        C3=c3,
        C4=c4,
        upper_opportunity=(c1 * r_max - gamma * nu) * (1.0 - lam) / denom,
        upper_risk=(c2 * r_max - gamma * nu) * (1.0 + lam) / denom,
        lower_opportunity=(r_max - nu) * (1.0 - lam) / denom,
        lower_risk=(r_max - nu) * (1.0 + lam) / denom,
    )


def nfg_envelope(mu: float, nu: float, eta: float, kappa: Optional[float], lam: float) -> NfgEnvelope:
    """Bundle the normal-form upper and lower envelopes at one trust level."""
    opp, risk = nfg_upper_bound(mu, nu, eta, lam)
    floor = None
    if kappa is not None and kappa >= 0:
        floor = nfg_lower_bound(mu, nu, kappa, lam)
    return NfgEnvelope(
        lam=lam,
        upper_opportunity=opp,
        upper_risk=risk,
        lower_risk_given_opportunity=floor,
    )
