from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from util import DomainError, check_positive, check_probability

SENSING_MODES = ("exogenous", "roc")


@dataclass(frozen=True)
class LinkParams:
    bits_per_packet: float
    slot_duration: float
    bandwidth: float
    snr: float
    mean_gain: float

    def __post_init__(self):
        check_positive("slot_duration", self.slot_duration)
        check_positive("bandwidth", self.bandwidth)
        check_positive("snr", self.snr)
        check_positive("mean_gain", self.mean_gain)
        # zero-sized packets are allowed: they never exceed capacity
        if not np.isfinite(self.bits_per_packet) or self.bits_per_packet < 0.0:
            raise DomainError(
                f"`bits_per_packet` must be nonnegative, got {self.bits_per_packet}"
            )

    @property
    def spectral_load(self) -> float:
        # b / (T W), bits per second per Hz with the whole slot available
        return self.bits_per_packet / (self.slot_duration * self.bandwidth)


@dataclass(frozen=True)
class SensingModel:
    mode: str = "exogenous"
    p_fa: float = 0.2
    p_md_exogenous: Optional[float] = 0.3
    sampling_freq: Optional[float] = None
    sensing_snr: Optional[float] = None

    def __post_init__(self):
        """
        Validates the sensing model after initialization.

        An exogenous model needs constant false-alarm and misdetection
        probabilities, whereas the ROC model needs the target false-alarm
        probability, the sampling frequency and the sensing SNR.

        Raises
        ------
        DomainError
            If the mode is unknown, a probability lies outside [0, 1], or a
        field required by the selected mode is missing."""
        if self.mode not in SENSING_MODES:
            raise DomainError(
                f"`mode` must be one of {SENSING_MODES}, got '{self.mode}'"
            )
        check_probability("p_fa", self.p_fa)
        if self.mode == "exogenous":
            check_probability("p_md", self.p_md_exogenous)
        else:
            check_positive("f_s", self.sampling_freq)
            check_positive("snr", self.sensing_snr)


def _check_sensing_time(link: LinkParams, tau: float) -> None:
    if tau < 0.0:
        raise DomainError(f"sensing duration must be nonnegative, got {tau}")
    if tau >= link.slot_duration:
        raise DomainError(
            f"no transmission time remains: tau={tau} >= T={link.slot_duration}"
        )


def transmission_rate(link: LinkParams, tau: float) -> float:
    """
    Computes the rate needed to fit one packet into the time left after sensing.

    Parameters
    ----------
    link : LinkParams
        Parameters of the transmitting link.
    tau : float
        Sensing duration in seconds, 0 <= tau < T.

    Returns
    -------
    float
        The transmission rate b / (T - tau) in bits per second.

    Raises
    ------
    DomainError
        If `tau` is negative or leaves no transmission time.
    """
    _check_sensing_time(link, tau)
    return link.bits_per_packet / (link.slot_duration - tau)


def success_prob(link: LinkParams, tau: float) -> float:
    """
    Computes the probability that a packet sent after `tau` seconds of sensing is
    received, i.e. that the required rate stays below the Rayleigh-faded capacity.

    With an exponentially distributed channel gain of mean ᾱ, the outage event
    r > W log2(1 + γ α) has complement probability
    exp(-(2^(b / (T W (1 - tau/T))) - 1) / (γ ᾱ)). The primary link uses this with
    tau = 0.

    Parameters
    ----------
    link : LinkParams
        Parameters of the transmitting link.
    tau : float
        Sensing duration in seconds, 0 <= tau < T.

    Returns
    -------
    float
        Probability of correct reception in [0, 1].

    Raises
    ------
    DomainError
        If `tau` is negative or leaves no transmission time.
    """
    _check_sensing_time(link, tau)
    exponent = link.spectral_load / (1.0 - tau / link.slot_duration)
    # expm1(x ln 2) keeps precision for tiny spectral loads
    threshold = np.expm1(exponent * np.log(2.0)) / (link.snr * link.mean_gain)
    return float(np.exp(-threshold))


def gaussian_tail(x: float) -> float:
    """Standard normal complementary CDF, Q(x)."""
    return float(special.ndtr(-x))


def gaussian_tail_inverse(p: float) -> float:
    """
    Inverts the standard normal complementary CDF, returning x with Q(x) = p.

    Parameters
    ----------
    p : float
        Tail probability, 0 < p < 1.

    Returns
    -------
    float
        The point whose upper tail probability is `p`.

    Raises
    ------
    DomainError
        If `p` is not strictly inside (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"Q^-1 is only defined on (0, 1), got {p}")
    return float(-special.ndtri(p))


def misdetection_prob(sensing: SensingModel, tau: float) -> float:
    """
    Returns the probability that the sensor declares the channel idle while the
    primary user transmits.

    In exogenous mode the constant misdetection probability is returned and
    `tau` is ignored. In ROC mode the energy-detector approximation for a target
    false-alarm probability is used:
    1 - Q((Q^-1(P_FA) - sqrt(tau f_s) γ) / sqrt(2 γ + 1)).

    Parameters
    ----------
    sensing : SensingModel
        The sensing model.
    tau : float
        Sensing duration in seconds, tau >= 0.

    Returns
    -------
    float
        Misdetection probability in [0, 1].

    Raises
    ------
    DomainError
        If `tau` is negative.
    """
    if tau < 0.0:
        raise DomainError(f"sensing duration must be nonnegative, got {tau}")
    if sensing.mode == "exogenous":
        return sensing.p_md_exogenous
    # the target P_FA may sit on the closed interval ends
    if sensing.p_fa <= 0.0:
        return 1.0
    if sensing.p_fa >= 1.0:
        return 0.0
    gamma = sensing.sensing_snr
    argument = (
        gaussian_tail_inverse(sensing.p_fa) - np.sqrt(tau * sensing.sampling_freq) * gamma
    ) / np.sqrt(2.0 * gamma + 1.0)
    return 1.0 - gaussian_tail(argument)


def false_alarm_prob(sensing: SensingModel) -> float:
    return sensing.p_fa
