from typing import Iterable, Optional

import numpy as np


# absolute slack for feasibility comparisons such as λ_p ≤ μ_p
FEASIBILITY_TOL = 1e-12


class DomainError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


def check_probability(name: str, value: float) -> None:
    """
    Validates that a value is a probability in the closed interval [0, 1].

    Parameters
    ----------
    name : str
        Name of the checked quantity, used in the error message.
    value : float
        The value to check.

    Raises
    ------
    DomainError
        If `value` is not a finite number in [0, 1].
    """
    if value is None or not np.isfinite(value) or value < 0.0 or value > 1.0:
        raise DomainError(f"`{name}` must be a probability in [0, 1], got {value}")


def check_positive(name: str, value: Optional[float]) -> None:
    if value is None or not np.isfinite(value) or value <= 0.0:
        raise DomainError(f"`{name}` must be strictly positive, got {value}")


def empty_queue_factor(lambda_p: float, mu_p: float) -> Optional[float]:
    """
    Returns the probability that the primary queue is empty, 1 - λ_p/μ_p.

    The factor is only defined while the primary queue is stable. Rates that
    exceed the service rate by less than `FEASIBILITY_TOL` are treated as equal
    so that boundary curves reach their pinch point exactly.

    Parameters
    ----------
    lambda_p : float
        Primary arrival rate in packets per slot.
    mu_p : float
        Primary service rate in packets per slot.

    Returns
    -------
    Optional[float]
        The empty-queue probability clipped to [0, 1], or None when λ_p > μ_p.
    """
    if lambda_p <= 0.0:
        return 1.0
    if mu_p <= 0.0 or lambda_p > mu_p + FEASIBILITY_TOL:
        return None
    return min(max(1.0 - lambda_p / mu_p, 0.0), 1.0)


def uniform_grid(lo: float, hi: float, points: int) -> np.ndarray:
    if points < 1:
        raise DomainError(f"grid needs at least one point, got {points}")
    if hi < lo:
        raise DomainError(f"grid bounds are reversed: lo={lo}, hi={hi}")
    return np.linspace(lo, hi, points)


def is_sorted_strictly(values: Iterable[float]) -> bool:
    values = list(values)
    return all(b > a for a, b in zip(values, values[1:]))
