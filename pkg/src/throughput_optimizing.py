from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Sequence, Tuple

import numpy as np
import structlog

import scheme_analyzing as sa
from scheme_analyzing import AccessPolicy, NetworkEnv, link_state
from util import (
    FEASIBILITY_TOL,
    DomainError,
    InfeasibleError,
    check_probability,
    is_sorted_strictly,
    uniform_grid,
)

logger = structlog.get_logger(__name__)

# schemes compared when switching, simplest mechanism first
SWITCHING_ORDER = ("So", "Sc", "S2")
TIE_TOL = 1e-12


@dataclass(frozen=True)
class FractionalProgram:
    a: float
    f: float
    c: float
    d: float
    K: float
    w: float

    def __post_init__(self):
        for name in ("a", "f", "c", "d", "K", "w"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise DomainError(f"`{name}` must be a positive constant, got {value}")

    def objective(self, x):
        return (self.a * x + self.f) / (self.c * x - self.d) + self.K * x


@dataclass(frozen=True)
class SweepGrid:
    tau_points: int = 101
    b_points: int = 101
    tau_max_fraction: float = 0.5

    def __post_init__(self):
        if self.tau_points < 1 or self.b_points < 1:
            raise DomainError(
                f"grids need at least one point, got tau_points={self.tau_points}, "
                f"b_points={self.b_points}"
            )
        if not 0.0 <= self.tau_max_fraction < 1.0:
            raise DomainError(
                "`tau_max_fraction` must lie in [0, 1), got "
                f"{self.tau_max_fraction}"
            )

    def tau_values(self, env: NetworkEnv) -> np.ndarray:
        tau_max = self.tau_max_fraction * env.slot_duration
        return uniform_grid(0.0, tau_max, self.tau_points)

    def b_values(self) -> np.ndarray:
        return uniform_grid(0.0, 1.0, self.b_points)


class SchemeOptimum(NamedTuple):
    lambda_s_max: float
    policy: AccessPolicy
    feasible: bool


class BestScheme(NamedTuple):
    scheme: str
    policy: AccessPolicy
    lambda_s_max: float
    feasible: bool = True


class RegionRow(NamedTuple):
    lambda_p: float
    lambda_s_max: float
    policy: AccessPolicy
    feasible: bool


@dataclass
class RegionCurve:
    scheme: str
    env_digest: str
    rows: List[RegionRow] = field(default_factory=list)

    def __post_init__(self):
        if not is_sorted_strictly(row.lambda_p for row in self.rows):
            raise DomainError("region curve rows must be sorted by increasing lambda_p")

    @property
    def lambda_p(self) -> np.ndarray:
        return np.array([row.lambda_p for row in self.rows])

    @property
    def lambda_s_max(self) -> np.ndarray:
        return np.array([row.lambda_s_max for row in self.rows])


class CrossoverFlags(NamedTuple):
    lambda_p: float
    so_value: float
    s2_short_value: float
    s2_long_value: float
    so_beats_s2_long: bool
    s2_short_beats_so: bool
    s2_short_beats_long: bool


def _fractional_argmax(
    a: float, f: float, c: float, d: float, K: float, w: float
) -> float:
    # stationary point of (a x + f)/(c x - d) + K x left of the pole at d/c
    root = np.sqrt((a * d + c * f) / K)
    return float(max(min((d - root) / c, (d - w) / c, 1.0), 0.0))


def solve_fractional(p: FractionalProgram) -> float:
    """
    Maximizes (a x + f)/(c x - d) + K x subject to 0 <= x <= (d - w)/c and x <= 1.

    Setting the derivative to zero gives (c x - d)^2 = (a d + c f)/K. Of the two
    roots only x = (d - sqrt((a d + c f)/K))/c lies on the side of the pole that
    satisfies the constraints, so the optimum is that root clipped to the feasible
    interval.

    Parameters
    ----------
    p : FractionalProgram
        The positive constants of the program.

    Returns
    -------
    float
        The maximizer x* in [0, 1].

    Raises
    ------
    InfeasibleError
        If d < w, in which case the feasible interval is empty.
    """
    if p.d < p.w:
        raise InfeasibleError(f"fractional program is infeasible: d={p.d} < w={p.w}")
    return _fractional_argmax(p.a, p.f, p.c, p.d, p.K, p.w)


def optimal_a_s1(env: NetworkEnv, tau: float, lambda_p: float) -> float:
    """
    Returns the idle-declaration access probability maximizing the SU service rate
    of S_1 for a fixed sensing duration:
    max(min((1 - sqrt(λ_p / P̄_{p,pd})) / P_MD, 1), 0).

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
    float
        The optimal access probability.

    Raises
    ------
    InfeasibleError
        If λ_p exceeds P̄_{p,pd}, which no access probability can sustain.
    """
    check_probability("lambda_p", lambda_p)
    state = link_state(env, tau)
    if lambda_p <= 0.0:
        return 1.0
    if state.p_ppd <= 0.0 or lambda_p > state.p_ppd + FEASIBILITY_TOL:
        raise InfeasibleError(
            f"lambda_p={lambda_p} exceeds the primary link success probability "
            f"{state.p_ppd}"
        )
    if state.p_md <= 0.0:
        return 1.0
    ratio = min(lambda_p / state.p_ppd, 1.0)
    return float(max(min((1.0 - np.sqrt(ratio)) / state.p_md, 1.0), 0.0))


def optimal_a_s2(env: NetworkEnv, tau: float, b_s: float, lambda_p: float) -> float:
    """
    Returns the idle-declaration access probability maximizing the SU service rate
    of S_2 for fixed busy-declaration access probability and sensing duration.

    Dividing μ_s by P̄_{s,sd} and dropping the constant b_s P_FA leaves
    (a x + f)/(c x - d) + K x in x = a_s with a = λ_p P̄_FA / P̄_{p,pd},
    f = λ_p b_s P_FA / P̄_{p,pd}, c = P_MD, d = P_MD + P̄_MD (1 - b_s), K = P̄_FA
    and w = λ_p / P̄_{p,pd}, which `solve_fractional` maximizes in closed form.
    Degenerate constants (no primary traffic, perfect detection, certain false
    alarm) are resolved directly.

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    tau : float
        Sensing duration in seconds.
    b_s : float
        Access probability after a busy declaration.
    lambda_p : float
        Primary arrival rate in packets per slot.

    Returns
    -------
    float
        The optimal access probability a_s*.

    Raises
    ------
    InfeasibleError
        If P_MD + P̄_MD (1 - b_s) < λ_p / P̄_{p,pd}, i.e. the primary queue cannot
    be kept stable for this (b_s, tau).
    """
    check_probability("lambda_p", lambda_p)
    check_probability("b_s", b_s)
    state = link_state(env, tau)
    if lambda_p > 0.0 and state.p_ppd <= 0.0:
        raise InfeasibleError("primary link never succeeds but lambda_p > 0")
    w = lambda_p / state.p_ppd if lambda_p > 0.0 else 0.0
    c = state.p_md
    d = state.p_md + (1.0 - state.p_md) * (1.0 - b_s)
    K = 1.0 - state.p_fa
    if d < w - FEASIBILITY_TOL:
        raise InfeasibleError(
            f"no access probability keeps the primary queue stable: "
            f"P_MD + (1 - P_MD)(1 - b_s) = {d} < lambda_p / P_ppd = {w}"
        )
    if c <= 0.0:
        # primary rate does not depend on a_s
        return 1.0
    if K <= 0.0:
        # SU gains nothing from idle declarations, while they cost the PU
        return 0.0
    d = max(d, w)
    return _fractional_argmax(w * K, w * b_s * state.p_fa, c, d, K, w)


def _best_sensing_policy(
    scheme: str,
    env: NetworkEnv,
    lambda_p: float,
    tau_values: Sequence[float],
    b_values: Sequence[float],
) -> SchemeOptimum:
    best = SchemeOptimum(0.0, AccessPolicy.silent(scheme), False)
    for tau in tau_values:
        tau = float(tau)
        if scheme == "Sc":
            candidates = [(1.0, 0.0)]
        elif scheme == "S1":
            try:
                candidates = [(optimal_a_s1(env, tau, lambda_p), 0.0)]
            except InfeasibleError:
                continue
        else:
            candidates = []
            for b_s in b_values:
                b_s = float(b_s)
                try:
                    candidates.append((optimal_a_s2(env, tau, b_s, lambda_p), b_s))
                except InfeasibleError:
                    continue

        for a_s, b_s in candidates:
            policy = AccessPolicy(scheme, tau=tau, a_s=a_s, b_s=b_s)
            rates = sa.rates_for_policy(env, policy, lambda_p)
            if not rates.feasible:
                continue
            if not best.feasible or rates.mu_s > best.lambda_s_max:
                best = SchemeOptimum(rates.mu_s, policy, True)
    return best


def maximize_at_tau(
    scheme: str, env: NetworkEnv, lambda_p: float, tau: float, b_points: int = 101
) -> SchemeOptimum:
    """
    Computes the boundary of a scheme for one fixed sensing duration, i.e. the
    maximum stable λ_s of the backlogged SU with every other knob optimized.

    Parameters
    ----------
    scheme : str
        One of 'Sc', 'S1', 'S2', 'So'. The sensing-free scheme ignores `tau`.
    env : NetworkEnv
        The primary/secondary link pair.
    lambda_p : float
        Primary arrival rate in packets per slot.
    tau : float
        Sensing duration in seconds.
    b_points : int, optional
        Number of points of the uniform b_s grid on [0, 1] used by S_2.

    Returns
    -------
    SchemeOptimum
        The boundary value, the maximizing policy and a feasibility flag.
    """
    check_probability("lambda_p", lambda_p)
    if scheme == "So":
        return _random_access_optimum(env, lambda_p)
    env.check_tau(tau)
    return _best_sensing_policy(
        scheme, env, lambda_p, [tau], uniform_grid(0.0, 1.0, b_points)
    )


def _random_access_optimum(env: NetworkEnv, lambda_p: float) -> SchemeOptimum:
    rates = sa.boundary_random(env, lambda_p)
    if not rates.feasible:
        return SchemeOptimum(0.0, AccessPolicy.silent("So"), False)
    policy = AccessPolicy("So", a_s=sa.optimal_a_random(env, lambda_p))
    return SchemeOptimum(rates.mu_s, policy, True)


def maximize_scheme(
    scheme: str, env: NetworkEnv, lambda_p: float, grid: SweepGrid = SweepGrid()
) -> SchemeOptimum:
    """
    Computes the maximum stable throughput of the backlogged SU under a scheme for
    one primary arrival rate.

    S_c is searched over the sensing-duration grid, S_1 uses the closed-form access
    probability at every grid duration, S_2 uses the closed-form a_s* at every
    (b_s, tau) grid point and the sensing-free scheme uses its closed-form
    boundary. Ties keep the first maximizer in grid order.

    Parameters
    ----------
    scheme : str
        One of 'Sc', 'S1', 'S2', 'So'.
    env : NetworkEnv
        The primary/secondary link pair.
    lambda_p : float
        Primary arrival rate in packets per slot.
    grid : SweepGrid, optional
        The tau and b_s grids.

    Returns
    -------
    SchemeOptimum
        The boundary value and its maximizing policy; (0, silent policy, False)
    when no grid point keeps the primary queue stable.
    """
    check_probability("lambda_p", lambda_p)
    if scheme not in sa.SCHEMES:
        raise DomainError(f"`scheme` must be one of {sa.SCHEMES}, got '{scheme}'")
    if scheme == "So":
        optimum = _random_access_optimum(env, lambda_p)
    else:
        optimum = _best_sensing_policy(
            scheme, env, lambda_p, grid.tau_values(env), grid.b_values()
        )
    if not optimum.feasible:
        logger.debug("No feasible policy", scheme=scheme, lambda_p=lambda_p)
    return optimum


def best_scheme(
    env: NetworkEnv, lambda_p: float, grid: SweepGrid = SweepGrid()
) -> BestScheme:
    """
    Picks the scheme with the largest maximum stable throughput for one primary
    arrival rate, which is what a switching parameter between schemes achieves.

    Only S_∘, S_c and S_2 are compared because S_1 is the b_s = 0 slice of S_2.
    Values within a relative 1e-12 of each other count as ties, and ties go to the
    scheme with less mechanism: S_∘, then S_c, then S_2.

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    lambda_p : float
        Primary arrival rate in packets per slot.
    grid : SweepGrid, optional
        The tau and b_s grids.

    Returns
    -------
    BestScheme
        The winning scheme, its policy and its boundary value.
    """
    best = None
    for scheme in SWITCHING_ORDER:
        optimum = maximize_scheme(scheme, env, lambda_p, grid)
        if best is None:
            best = BestScheme(
                scheme, optimum.policy, optimum.lambda_s_max, optimum.feasible
            )
            continue
        margin = TIE_TOL * max(1.0, abs(best.lambda_s_max))
        if optimum.lambda_s_max > best.lambda_s_max + margin or (
            optimum.feasible and not best.feasible
        ):
            best = BestScheme(
                scheme, optimum.policy, optimum.lambda_s_max, optimum.feasible
            )
    return best


def max_feasible_lambda_p(
    scheme: str, env: NetworkEnv, grid: SweepGrid = SweepGrid()
) -> float:
    # the conventional scheme always interferes after a misdetection
    if scheme == "Sc":
        states = [link_state(env, float(tau)) for tau in grid.tau_values(env)]
        return float(max(s.p_ppd * (1.0 - s.p_md) for s in states))
    return float(link_state(env, 0.0).p_ppd)


def region_curve(
    scheme: str,
    env: NetworkEnv,
    lambda_p_samples: int,
    grid: SweepGrid = SweepGrid(),
) -> RegionCurve:
    """
    Samples the stability-region boundary of a scheme with a backlogged SU.

    λ_p is sampled uniformly from 0 up to the largest primary rate the scheme can
    sustain, so the last row sits on the pinch point where λ_s_max is 0.

    Parameters
    ----------
    scheme : str
        One of 'Sc', 'S1', 'S2', 'So'.
    env : NetworkEnv
        The primary/secondary link pair.
    lambda_p_samples : int
        Number of λ_p samples, at least 2.
    grid : SweepGrid, optional
        The tau and b_s grids.

    Returns
    -------
    RegionCurve
        Rows of (λ_p, λ_s_max, optimal policy, feasible) sorted by λ_p.

    Raises
    ------
    DomainError
        If fewer than two samples are requested.
    InfeasibleError
        If the scheme cannot sustain any positive primary rate.
    """
    if lambda_p_samples < 2:
        raise DomainError(f"need at least 2 lambda_p samples, got {lambda_p_samples}")
    lambda_max = min(max_feasible_lambda_p(scheme, env, grid), 1.0)
    if lambda_max <= 0.0:
        raise InfeasibleError(f"scheme {scheme} cannot sustain any primary traffic")

    rows = []
    for lambda_p in uniform_grid(0.0, lambda_max, lambda_p_samples):
        lambda_p = float(lambda_p)
        optimum = maximize_scheme(scheme, env, lambda_p, grid)
        rows.append(
            RegionRow(lambda_p, optimum.lambda_s_max, optimum.policy, optimum.feasible)
        )
    logger.debug(
        "Sampled region curve",
        scheme=scheme,
        samples=lambda_p_samples,
        lambda_p_max=lambda_max,
    )
    return RegionCurve(scheme=scheme, env_digest=env.digest(), rows=rows)


def tau_sweep_curve(
    env: NetworkEnv,
    tau: float,
    lambda_p_samples: int,
    b_points: int = 101,
    scheme: str = "S2",
) -> RegionCurve:
    """Samples the boundary of a scheme whose sensing duration is held at `tau`."""
    if lambda_p_samples < 2:
        raise DomainError(f"need at least 2 lambda_p samples, got {lambda_p_samples}")
    state = link_state(env, 0.0 if scheme == "So" else tau)
    lambda_max = state.p_ppd
    if scheme == "Sc":
        lambda_max *= 1.0 - state.p_md
    rows = []
    for lambda_p in uniform_grid(0.0, min(lambda_max, 1.0), lambda_p_samples):
        optimum = maximize_at_tau(scheme, env, float(lambda_p), tau, b_points)
        rows.append(
            RegionRow(
                float(lambda_p), optimum.lambda_s_max, optimum.policy, optimum.feasible
            )
        )
    return RegionCurve(scheme=scheme, env_digest=env.digest(), rows=rows)


def crossover_flags(
    env: NetworkEnv,
    lambda_p: float,
    tau_short: float,
    tau_long: float,
    b_points: int = 101,
) -> CrossoverFlags:
    """
    Evaluates when sensing pays off at one primary arrival rate.

    Compares the sensing-free boundary with the S_2 boundary at a short and a long
    sensing duration, and the two S_2 boundaries with each other.

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    lambda_p : float
        Primary arrival rate in packets per slot.
    tau_short : float
        The short sensing duration in seconds.
    tau_long : float
        The long sensing duration in seconds, larger than `tau_short`.
    b_points : int, optional
        Number of points of the b_s grid.

    Returns
    -------
    CrossoverFlags
        The three boundary values and the strict comparisons between them.
    """
    if tau_long <= tau_short:
        raise DomainError(
            f"`tau_long` must exceed `tau_short`, got {tau_long} <= {tau_short}"
        )
    so_value = maximize_at_tau("So", env, lambda_p, 0.0).lambda_s_max
    short = maximize_at_tau("S2", env, lambda_p, tau_short, b_points).lambda_s_max
    long_value = maximize_at_tau("S2", env, lambda_p, tau_long, b_points).lambda_s_max
    return CrossoverFlags(
        lambda_p=lambda_p,
        so_value=so_value,
        s2_short_value=short,
        s2_long_value=long_value,
        so_beats_s2_long=so_value > long_value,
        s2_short_beats_so=short > so_value,
        s2_short_beats_long=short > long_value,
    )


def grid_oracle(
    objective: Callable,
    lo: float,
    hi: float,
    steps: int,
    vectorized: bool = False,
) -> Tuple[float, float]:
    """
    Maximizes a scalar function by exhaustive evaluation on a uniform grid. Used to
    verify every closed-form maximizer in this package.

    Parameters
    ----------
    objective : Callable
        Function of one real variable. NaN values count as -inf.
    lo : float
        Lower end of the search interval.
    hi : float
        Upper end of the search interval.
    steps : int
        Number of grid points, at least 2.
    vectorized : bool, optional
        Whether `objective` accepts a numpy array and evaluates it elementwise,
    which is much faster for fine grids.

    Returns
    -------
    Tuple[float, float]
        The maximizing grid point and the maximum. Ties resolve to the lowest grid
    point.
    """
    if steps < 2:
        raise DomainError(f"grid oracle needs at least 2 steps, got {steps}")
    xs = uniform_grid(lo, hi, steps)
    if vectorized:
        values = np.asarray(objective(xs), dtype=float)
    else:
        values = np.array([objective(float(x)) for x in xs], dtype=float)
    values = np.where(np.isnan(values), -np.inf, values)
    i = int(np.argmax(values))
    return float(xs[i]), float(values[i])


def secondary_rate_curve(
    scheme: str, env: NetworkEnv, tau: float, lambda_p: float, b_s: float = 0.0
) -> Callable[[np.ndarray], np.ndarray]:
    """
    Builds the SU service rate as a vectorized function of a_s, with infeasible
    access probabilities mapped to 0 as the service-rate formulas do.
    """
    state = link_state(env, 0.0 if scheme == "So" else tau)

    def curve(a_s: np.ndarray) -> np.ndarray:
        a_s = np.asarray(a_s, dtype=float)
        if scheme == "So":
            mu_p = (1.0 - a_s) * state.p_ppd
            mu_s_idle = a_s * state.p_ssd
        else:
            busy_access = b_s if scheme == "S2" else 0.0
            mu_p = state.p_ppd * (
                state.p_md * (1.0 - a_s) + (1.0 - state.p_md) * (1.0 - busy_access)
            )
            mu_s_idle = state.p_ssd * (
                a_s * (1.0 - state.p_fa) + busy_access * state.p_fa
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(mu_p > 0.0, 1.0 - lambda_p / mu_p, 0.0)
        if lambda_p <= 0.0:
            factor = np.ones_like(a_s)
        feasible = factor >= -FEASIBILITY_TOL
        return np.where(feasible, mu_s_idle * np.clip(factor, 0.0, 1.0), 0.0)

    return curve
