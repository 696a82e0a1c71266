import dataclasses
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Union

import numpy as np
import structlog

from scheme_analyzing import AccessPolicy, NetworkEnv, link_state
from util import DomainError, check_probability

logger = structlog.get_logger(__name__)

BACKLOGGED = "backlogged"
STABILITY_EPS = 1e-3
TREND_CHECKPOINTS = 100
BLOCK_SLOTS = 1 << 16
# per-slot uniforms, one column each, drawn in this order
DRAW_ORDER = ("arrival_p", "arrival_s", "sensing", "access", "outage_p", "outage_s")


@dataclass
class SimConfig:
    slots: int = 1_000_000
    seed: int = 42
    lambda_p: float = 0.2
    lambda_s: Union[float, str] = BACKLOGGED
    warmup_slots: Optional[int] = None

    def __post_init__(self):
        """
        Validates the simulation settings and applies the default warm-up of 10% of
        the run.

        Raises
        ------
        DomainError
            If the slot count is not positive, the seed is not a 64-bit unsigned
        integer, an arrival rate is not a probability, or the warm-up leaves no slot
        to measure."""
        if self.slots <= 0:
            raise DomainError(f"`slots` must be positive, got {self.slots}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"`seed` must be a 64-bit unsigned integer, got {self.seed}")
        check_probability("lambda_p", self.lambda_p)
        if self.lambda_s != BACKLOGGED:
            check_probability("lambda_s", self.lambda_s)
        if self.warmup_slots is None:
            self.warmup_slots = self.slots // 10
        if not 0 <= self.warmup_slots < self.slots:
            raise DomainError(
                f"zero slots remain after warmup: warmup_slots={self.warmup_slots}, "
                f"slots={self.slots}"
            )

    @property
    def backlogged(self) -> bool:
        return self.lambda_s == BACKLOGGED


@dataclass(frozen=True)
class SimReport:
    empirical_mu_p: float
    empirical_mu_s: float
    empirical_mu_s_idle: float
    mean_qp: float
    mean_qs: float
    final_qp_trend: float
    final_qs_trend: float
    stability_verdict: str
    seed_used: int
    measured_slots: int
    busy_slots: int
    idle_slots: int
    primary_departures: int
    secondary_departures: int


class EmpiricalRates(NamedTuple):
    mu_p: float
    mu_s: float
    mu_s_idle: float
    mu_p_stderr: float
    mu_s_idle_stderr: float
    busy_slots: int
    idle_slots: int
    primary_defined: bool


class _SlotOutcomes(NamedTuple):
    arrival_p: np.ndarray
    arrival_s: np.ndarray
    # SU transmits if it holds a packet and the PU is busy
    su_tx_busy: np.ndarray
    # SU transmits and succeeds if it holds a packet and the PU is idle
    su_ok_idle: np.ndarray
    pu_link_ok: np.ndarray


class _Accumulator:
    def __init__(self, cfg: SimConfig) -> None:
        self.warmup = cfg.warmup_slots
        half = cfg.slots // 2
        self.checkpoints = np.unique(
            np.linspace(half, cfg.slots - 1, TREND_CHECKPOINTS).astype(np.int64)
        )
        self.qp_samples: List[int] = []
        self.qs_samples: List[int] = []
        self.busy_slots = 0
        self.idle_slots = 0
        self.primary_departures = 0
        self.secondary_departures = 0
        self.qp_sum = 0
        self.qs_sum = 0

    def add_block(
        self,
        start: int,
        qp: np.ndarray,
        qs: np.ndarray,
        busy: np.ndarray,
        idle_ready: np.ndarray,
        dep_p: np.ndarray,
        dep_s: np.ndarray,
    ) -> None:
        """
        Accumulates the statistics of one block of consecutive slots. Slots inside
        the warm-up only contribute trend checkpoints.

        Parameters
        ----------
        start : int
            Index of the first slot of the block.
        qp : np.ndarray
            Primary queue size at the start of each slot.
        qs : np.ndarray
            Secondary queue size at the start of each slot.
        busy : np.ndarray
            Whether the primary queue was nonempty.
        idle_ready : np.ndarray
            Whether the primary queue was empty while the SU held a packet.
        dep_p : np.ndarray
            Primary departures.
        dep_s : np.ndarray
            Secondary departures.
        """
        n = len(qp)
        in_block = (self.checkpoints >= start) & (self.checkpoints < start + n)
        local = self.checkpoints[in_block] - start
        self.qp_samples.extend(qp[local].tolist())
        self.qs_samples.extend(qs[local].tolist())

        skip = min(max(self.warmup - start, 0), n)
        self.busy_slots += int(np.count_nonzero(busy[skip:]))
        self.idle_slots += int(np.count_nonzero(idle_ready[skip:]))
        self.primary_departures += int(np.count_nonzero(dep_p[skip:]))
        self.secondary_departures += int(np.count_nonzero(dep_s[skip:]))
        self.qp_sum += int(qp[skip:].sum())
        self.qs_sum += int(qs[skip:].sum())


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _slot_outcomes(
    uniforms: np.ndarray,
    env: NetworkEnv,
    policy: AccessPolicy,
    cfg: SimConfig,
) -> _SlotOutcomes:
    """
    Turns a block of per-slot uniforms into the events of each slot.

    Sensing, access and outage are decided for both possible primary states so
    that the queue recursion only has to pick the relevant outcome per slot.

    Parameters
    ----------
    uniforms : np.ndarray
        Array of shape (slots, 6) with columns in `DRAW_ORDER`.
    env : NetworkEnv
        The primary/secondary link pair.
    policy : AccessPolicy
        The SU policy.
    cfg : SimConfig
        The arrival rates.

    Returns
    -------
    _SlotOutcomes
        Boolean arrays, one entry per slot.
    """
    state = link_state(env, policy.tau)
    u_arr_p, u_arr_s, u_sense, u_access, u_out_p, u_out_s = uniforms.T

    if policy.scheme == "So":
        su_tx_busy = u_access < policy.a_s
        su_tx_idle = su_tx_busy
    else:
        declared_busy_if_busy = u_sense < 1.0 - state.p_md
        declared_busy_if_idle = u_sense < state.p_fa
        su_tx_busy = np.where(
            declared_busy_if_busy, u_access < policy.b_s, u_access < policy.a_s
        )
        su_tx_idle = np.where(
            declared_busy_if_idle, u_access < policy.b_s, u_access < policy.a_s
        )

    lambda_s = 1.0 if cfg.backlogged else cfg.lambda_s
    return _SlotOutcomes(
        arrival_p=u_arr_p < cfg.lambda_p,
        arrival_s=u_arr_s < lambda_s,
        su_tx_busy=su_tx_busy,
        su_ok_idle=su_tx_idle & (u_out_s < state.p_ssd),
        pu_link_ok=u_out_p < state.p_ppd,
    )


def _primary_queue_block(
    qp0: int, served_if_busy: np.ndarray, arrivals: np.ndarray
) -> np.ndarray:
    """
    Solves Q^{t+1} = (Q^t - U^t)^+ + A^t over a block without a Python loop.

    The post-departure size H_t = max(H_{t-1} + A_{t-1} - s_t, 0) is a Lindley
    recursion, so H_t = S_t - min(-Q_0, min_{k<=t} S_k) with S the cumulative sum
    of the increments.

    Parameters
    ----------
    qp0 : int
        Queue size at the start of the block.
    served_if_busy : np.ndarray
        Whether a head-of-line packet would be served in each slot.
    arrivals : np.ndarray
        Arrivals in each slot.

    Returns
    -------
    np.ndarray
        Queue size at the start of each slot, followed by the size after the last
    slot (length n + 1).
    """
    served = served_if_busy.astype(np.int64)
    arrived = arrivals.astype(np.int64)
    increments = -served
    increments[1:] += arrived[:-1]
    sums = np.cumsum(increments)
    floor = np.minimum(np.minimum.accumulate(sums), -qp0)
    after_departure = sums - floor
    qp = np.empty(len(served) + 1, dtype=np.int64)
    qp[0] = qp0
    qp[1:] = after_departure + arrived
    return qp


def _run_backlogged(
    rng: np.random.Generator,
    env: NetworkEnv,
    policy: AccessPolicy,
    cfg: SimConfig,
    acc: _Accumulator,
) -> None:
    qp0 = 0
    for start in range(0, cfg.slots, BLOCK_SLOTS):
        n = min(BLOCK_SLOTS, cfg.slots - start)
        events = _slot_outcomes(rng.random((n, len(DRAW_ORDER))), env, policy, cfg)
        served_if_busy = ~events.su_tx_busy & events.pu_link_ok
        qp_all = _primary_queue_block(qp0, served_if_busy, events.arrival_p)
        qp, qp0 = qp_all[:-1], int(qp_all[-1])
        busy = qp > 0
        acc.add_block(
            start,
            qp,
            np.zeros_like(qp),
            busy,
            ~busy,
            busy & served_if_busy,
            ~busy & events.su_ok_idle,
        )


def _run_interacting(
    rng: np.random.Generator,
    env: NetworkEnv,
    policy: AccessPolicy,
    cfg: SimConfig,
    acc: _Accumulator,
) -> None:
    qp, qs = 0, 0
    for start in range(0, cfg.slots, BLOCK_SLOTS):
        n = min(BLOCK_SLOTS, cfg.slots - start)
        events = _slot_outcomes(rng.random((n, len(DRAW_ORDER))), env, policy, cfg)
        qp_log = np.empty(n, dtype=np.int64)
        qs_log = np.empty(n, dtype=np.int64)
        dep_p = np.zeros(n, dtype=bool)
        dep_s = np.zeros(n, dtype=bool)
        # slot t+1 depends on slot t through both queues
        for t, (a_p, a_s, tx_busy, ok_idle, link_ok) in enumerate(
            zip(
                events.arrival_p.tolist(),
                events.arrival_s.tolist(),
                events.su_tx_busy.tolist(),
                events.su_ok_idle.tolist(),
                events.pu_link_ok.tolist(),
            )
        ):
            qp_log[t] = qp
            qs_log[t] = qs
            if qp > 0:
                if link_ok and not (qs > 0 and tx_busy):
                    qp -= 1
                    dep_p[t] = True
            elif qs > 0 and ok_idle:
                qs -= 1
                dep_s[t] = True
            qp += a_p
            qs += a_s
        busy = qp_log > 0
        acc.add_block(
            start, qp_log, qs_log, busy, ~busy & (qs_log > 0), dep_p, dep_s
        )


def _trend(samples: List[int], checkpoints: np.ndarray) -> float:
    if len(samples) < 2:
        return 0.0
    slope, _ = np.polyfit(checkpoints.astype(float), np.asarray(samples, float), 1)
    return float(slope)


def _verdict(trend: float) -> str:
    if trend < STABILITY_EPS:
        return "stable"
    if trend > STABILITY_EPS:
        return "unstable"
    return "inconclusive"


def simulate(env: NetworkEnv, policy: AccessPolicy, cfg: SimConfig) -> SimReport:
    """
    Simulates the primary and secondary queues slot by slot under an access policy.

    In every slot the primary user transmits if its queue is nonempty, the SU
    senses (unless the scheme skips sensing) and transmits according to its access
    probabilities, overlapping transmissions both fail, lone transmissions succeed
    unless their link is in outage, and departures happen before the slot's
    Bernoulli arrivals join the queues. Rates are measured after the warm-up; queue
    trends are least-squares slopes over checkpoints spread across the second half
    of the run.

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    policy : AccessPolicy
        The SU policy.
    cfg : SimConfig
        Run length, seed, arrival rates and warm-up.

    Returns
    -------
    SimReport
        Empirical service rates, queue statistics and the stability verdict. The
    same inputs always give the same report.
    """
    env.check_tau(policy.tau)
    rng = generator(cfg.seed)
    acc = _Accumulator(cfg)
    if cfg.backlogged:
        _run_backlogged(rng, env, policy, cfg, acc)
    else:
        _run_interacting(rng, env, policy, cfg, acc)

    measured = cfg.slots - cfg.warmup_slots
    qp_trend = _trend(acc.qp_samples, acc.checkpoints)
    qs_trend = 0.0 if cfg.backlogged else _trend(acc.qs_samples, acc.checkpoints)
    report = SimReport(
        empirical_mu_p=acc.primary_departures / acc.busy_slots if acc.busy_slots else 0.0,
        empirical_mu_s=acc.secondary_departures / measured,
        empirical_mu_s_idle=(
            acc.secondary_departures / acc.idle_slots if acc.idle_slots else 0.0
        ),
        mean_qp=acc.qp_sum / measured,
        mean_qs=acc.qs_sum / measured,
        final_qp_trend=qp_trend,
        final_qs_trend=qs_trend,
        stability_verdict=_verdict(max(qp_trend, qs_trend)),
        seed_used=cfg.seed,
        measured_slots=measured,
        busy_slots=acc.busy_slots,
        idle_slots=acc.idle_slots,
        primary_departures=acc.primary_departures,
        secondary_departures=acc.secondary_departures,
    )
    logger.debug(
        "Simulated queues",
        scheme=policy.scheme,
        slots=cfg.slots,
        seed=cfg.seed,
        verdict=report.stability_verdict,
    )
    return report


def _binomial_stderr(rate: float, trials: int) -> float:
    if trials == 0:
        return float("inf")
    return float(np.sqrt(rate * (1.0 - rate) / trials))


def empirical_rates(
    env: NetworkEnv, policy: AccessPolicy, lambda_p: float, cfg: SimConfig
) -> EmpiricalRates:
    """
    Measures the service rates of the backlogged-SU system by simulation.

    The primary rate is departures per slot with a nonempty primary queue. The SU
    rate is reported both unconditionally (departures per slot) and conditioned on
    an empty primary queue (departures per empty-queue slot). Conditional rates
    come with binomial standard errors.

    Parameters
    ----------
    env : NetworkEnv
        The primary/secondary link pair.
    policy : AccessPolicy
        The SU policy.
    lambda_p : float
        Primary arrival rate in packets per slot.
    cfg : SimConfig
        Run length, seed and warm-up; its arrival rates are replaced.

    Returns
    -------
    EmpiricalRates
        The measured rates. `primary_defined` is False when the primary queue was
    never nonempty, in which case `mu_p` is meaningless.
    """
    cfg = dataclasses.replace(cfg, lambda_p=lambda_p, lambda_s=BACKLOGGED)
    report = simulate(env, policy, cfg)
    if report.busy_slots == 0:
        logger.warning(
            "Primary queue was never busy; its service rate is undefined",
            lambda_p=lambda_p,
        )
    return EmpiricalRates(
        mu_p=report.empirical_mu_p,
        mu_s=report.empirical_mu_s,
        mu_s_idle=report.empirical_mu_s_idle,
        mu_p_stderr=_binomial_stderr(report.empirical_mu_p, report.busy_slots),
        mu_s_idle_stderr=_binomial_stderr(
            report.empirical_mu_s_idle, report.idle_slots
        ),
        busy_slots=report.busy_slots,
        idle_slots=report.idle_slots,
        primary_defined=report.busy_slots > 0,
    )


def stability_probe(
    env: NetworkEnv,
    policy: AccessPolicy,
    lambda_p: float,
    lambda_s: float,
    cfg: SimConfig,
) -> str:
    """
    Judges whether both queues stay stable under real secondary arrivals.

    Returns 'stable' when the fitted growth of both queues over the second half of
    the run stays below half the dead-band, 'unstable' when either exceeds the
    dead-band and 'inconclusive' in between.
    """
    if lambda_s == BACKLOGGED:
        raise DomainError("stability probe needs a finite secondary arrival rate")
    cfg = dataclasses.replace(cfg, lambda_p=lambda_p, lambda_s=lambda_s)
    report = simulate(env, policy, cfg)
    if report.stability_verdict == "inconclusive":
        logger.warning(
            "Queue trend inside the dead-band",
            qp_trend=report.final_qp_trend,
            qs_trend=report.final_qs_trend,
        )
    return report.stability_verdict
