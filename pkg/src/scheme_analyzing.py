import functools
import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

import link_modeling as lm
from link_modeling import LinkParams, SensingModel
from util import DomainError, check_probability, empty_queue_factor

SCHEMES = ("Sc", "S1", "S2", "So")
SUCCESS_MODES = ("constant", "physical")


@dataclass(frozen=True)
class NetworkEnv:
    primary_link: LinkParams
    secondary_link: LinkParams
    sensing: SensingModel = field(default_factory=SensingModel)
    success_mode: str = "physical"
    constant_success_p: Optional[float] = None
    constant_success_s: Optional[float] = None

    def __post_init__(self):
        if self.success_mode not in SUCCESS_MODES:
            raise DomainError(
                f"`success_mode` must be one of {SUCCESS_MODES}, "
                f"got '{self.success_mode}'"
            )
        if self.success_mode == "constant":
            check_probability("p_ppd", self.constant_success_p)
            check_probability("p_ssd", self.constant_success_s)

    @property
    def slot_duration(self) -> float:
        return self.secondary_link.slot_duration

    def check_tau(self, tau: float) -> None:
        if tau < 0.0 or tau >= self.slot_duration:
            raise DomainError(
                f"sensing duration must satisfy 0 <= tau < T={self.slot_duration}, "
                f"got {tau}"
            )

    def primary_success(self) -> float:
        if self.success_mode == "constant":
            return self.constant_success_p
        return lm.success_prob(self.primary_link, 0.0)

    def secondary_success(self, tau: float) -> float:
        if self.success_mode == "constant":
            self.check_tau(tau)
            return self.constant_success_s
        return lm.success_prob(self.secondary_link, tau)

    def p_md(self, tau: float) -> float:
        return lm.misdetection_prob(self.sensing, tau)

    def p_fa(self) -> float:
        return lm.false_alarm_prob(self.sensing)

    def digest(self) -> str:
        # short identifier carried by region curves, stable across processes
        return hashlib.sha1(repr(self).encode()).hexdigest()[:12]


class LinkState(NamedTuple):
    p_ppd: float
    p_ssd: float
    p_md: float
    p_fa: float


@functools.lru_cache(maxsize=1 << 16)
def link_state(env: NetworkEnv, tau: float) -> LinkState:
    env.check_tau(tau)
    return LinkState(
        p_ppd=env.primary_success(),
        p_ssd=env.secondary_success(tau),
        p_md=env.p_md(tau),
        p_fa=env.p_fa(),
    )


@dataclass
class AccessPolicy:
    scheme: str
    tau: float = 0.0
    a_s: float = 1.0
    b_s: float = 0.0

    def __post_init__(self):
        """
        Validates the policy and pins the knobs a scheme does not expose.

        The conventional scheme always accesses on an idle declaration and never
        on a busy one, S_1 never accesses on a busy declaration, and the
        sensing-free scheme spends no time sensing.

        Raises
        ------
        DomainError
            If the scheme is unknown, the sensing duration is negative, or an
        access probability lies outside [0, 1]."""
        if self.scheme not in SCHEMES:
            raise DomainError(f"`scheme` must be one of {SCHEMES}, got '{self.scheme}'")
        if self.scheme == "Sc":
            self.a_s, self.b_s = 1.0, 0.0
        elif self.scheme == "S1":
            self.b_s = 0.0
        elif self.scheme == "So":
            self.tau, self.b_s = 0.0, 0.0
        if self.tau < 0.0:
            raise DomainError(f"sensing duration must be nonnegative, got {self.tau}")
        check_probability("a_s", self.a_s)
        check_probability("b_s", self.b_s)

    @classmethod
    def silent(cls, scheme: str) -> "AccessPolicy":
        if scheme == "Sc":
            return cls(scheme)
        return cls(scheme, tau=0.0, a_s=0.0, b_s=0.0)


@dataclass(frozen=True)
class ServiceRates:
    mu_p: float
    mu_s: float
    feasible: bool
    # SU rate given an empty primary queue
    mu_s_idle: float = 0.0


def _compose_rates(
    mu_p: float, mu_s_idle: float, lambda_p: float
) -> ServiceRates:
    check_probability("lambda_p", lambda_p)
    mu_p = min(max(mu_p, 0.0), 1.0)
    factor = empty_queue_factor(lambda_p, mu_p)
    if factor is None:
        return ServiceRates(mu_p=mu_p, mu_s=0.0, feasible=False, mu_s_idle=mu_s_idle)
    return ServiceRates(
        mu_p=mu_p, mu_s=mu_s_idle * factor, feasible=True, mu_s_idle=mu_s_idle
    )


def rates_conventional(env: NetworkEnv, tau: float, lambda_p: float) -> ServiceRates:
    """
    Computes the average service rates of the conventional sense-then-transmit
    scheme.

    The primary queue is served when the SU detects the primary activity and the
    primary link is not in outage. The SU is served only when the primary queue is
    empty, no false alarm is raised and its own link is not in outage.

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    tau : float
        Sensing duration in seconds.
    lambda_p : float
        Primary arrival rate in packets per slot.

    Returns
    -------
    ServiceRates
        μ_p = P̄_{p,pd} P̄_MD and μ_s = P̄_{s,sd} P̄_FA (1 - λ_p/μ_p); μ_s is 0
    and `feasible` False when λ_p exceeds μ_p.
    """
    s = link_state(env, tau)
    mu_p = s.p_ppd * (1.0 - s.p_md)
    mu_s_idle = s.p_ssd * (1.0 - s.p_fa)
    return _compose_rates(mu_p, mu_s_idle, lambda_p)


def rates_s1(env: NetworkEnv, tau: float, a_s: float, lambda_p: float) -> ServiceRates:
    """
    Computes the average service rates when the SU accesses with probability
    `a_s` after an idle declaration and stays silent after a busy one.

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    tau : float
        Sensing duration in seconds.
    a_s : float
        Access probability after an idle declaration.
    lambda_p : float
        Primary arrival rate in packets per slot.

    Returns
    -------
    ServiceRates
        μ_p = P̄_{p,pd} (1 - a_s P_MD) and μ_s = a_s P̄_{s,sd} P̄_FA (1 - λ_p/μ_p).
    """
    check_probability("a_s", a_s)
    s = link_state(env, tau)
    mu_p = s.p_ppd * (1.0 - a_s * s.p_md)
    mu_s_idle = a_s * s.p_ssd * (1.0 - s.p_fa)
    return _compose_rates(mu_p, mu_s_idle, lambda_p)


def rates_s2(
    env: NetworkEnv, tau: float, a_s: float, b_s: float, lambda_p: float
) -> ServiceRates:
    """
    Computes the average service rates when the SU accesses with probability
    `a_s` after an idle declaration and with probability `b_s` after a busy one.

    The primary packet survives when the SU stays silent, whatever the sensing
    outcome was. The SU is served from an empty primary queue either after a
    correct idle declaration or after a false alarm.

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    tau : float
        Sensing duration in seconds.
    a_s : float
        Access probability after an idle declaration.
    b_s : float
        Access probability after a busy declaration.
    lambda_p : float
        Primary arrival rate in packets per slot.

    Returns
    -------
    ServiceRates
        μ_p = P̄_{p,pd} (P_MD (1 - a_s) + P̄_MD (1 - b_s)) and
    μ_s = P̄_{s,sd} (a_s P̄_FA + b_s P_FA) (1 - λ_p/μ_p).
    """
    check_probability("a_s", a_s)
    check_probability("b_s", b_s)
    s = link_state(env, tau)
    mu_p = s.p_ppd * (s.p_md * (1.0 - a_s) + (1.0 - s.p_md) * (1.0 - b_s))
    mu_s_idle = s.p_ssd * (a_s * (1.0 - s.p_fa) + b_s * s.p_fa)
    return _compose_rates(mu_p, mu_s_idle, lambda_p)


def rates_random(env: NetworkEnv, a_s: float, lambda_p: float) -> ServiceRates:
    """
    Computes the average service rates of random access without sensing. The SU
    link is evaluated with the whole slot available for transmission.

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    a_s : float
        Access probability in every slot.
    lambda_p : float
        Primary arrival rate in packets per slot.

    Returns
    -------
    ServiceRates
        μ_p = (1 - a_s) P̄_{p,pd} and μ_s = a_s P̄_{s,sd} (1 - λ_p/μ_p).
    """
    check_probability("a_s", a_s)
    s = link_state(env, 0.0)
    mu_p = (1.0 - a_s) * s.p_ppd
    mu_s_idle = a_s * s.p_ssd
    return _compose_rates(mu_p, mu_s_idle, lambda_p)


def boundary_random(env: NetworkEnv, lambda_p: float) -> ServiceRates:
    """
    Evaluates the closed-form boundary of the sensing-free scheme,
    λ_s = P̄_{s,sd} (1 - sqrt(λ_p / P̄_{p,pd}))^2.

    The boundary is reached with a_s = 1 - sqrt(λ_p / P̄_{p,pd}), so the returned
    rates are those of that policy: μ_s is the boundary and μ_p equals
    sqrt(λ_p P̄_{p,pd}).

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    lambda_p : float
        Primary arrival rate in packets per slot.

    Returns
    -------
    ServiceRates
        Rates at the maximizing access probability; `mu_s` is 0 and `feasible`
    False when λ_p exceeds P̄_{p,pd}.
    """
    check_probability("lambda_p", lambda_p)
    p_ppd, p_ssd, _, _ = link_state(env, 0.0)
    if lambda_p > 0.0 and (p_ppd <= 0.0 or lambda_p > p_ppd):
        return ServiceRates(mu_p=p_ppd, mu_s=0.0, feasible=False, mu_s_idle=0.0)
    root = np.sqrt(lambda_p / p_ppd) if lambda_p > 0.0 else 0.0
    return ServiceRates(
        mu_p=float(root * p_ppd),
        mu_s=float(p_ssd * (1.0 - root) ** 2),
        feasible=True,
        mu_s_idle=float(p_ssd * (1.0 - root)),
    )


def optimal_a_random(env: NetworkEnv, lambda_p: float) -> float:
    p_ppd = link_state(env, 0.0).p_ppd
    if lambda_p <= 0.0:
        return 1.0
    if p_ppd <= 0.0 or lambda_p > p_ppd:
        return 0.0
    return float(1.0 - np.sqrt(lambda_p / p_ppd))


def rates_for_policy(
    env: NetworkEnv, policy: AccessPolicy, lambda_p: float
) -> ServiceRates:
    """Dispatches to the service-rate formula of the policy's scheme."""
    if policy.scheme == "Sc":
        return rates_conventional(env, policy.tau, lambda_p)
    if policy.scheme == "S1":
        return rates_s1(env, policy.tau, policy.a_s, lambda_p)
    if policy.scheme == "S2":
        return rates_s2(env, policy.tau, policy.a_s, policy.b_s, lambda_p)
    return rates_random(env, policy.a_s, lambda_p)
