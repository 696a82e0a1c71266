import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from link_modeling import LinkParams, SensingModel
from queue_simulating import BACKLOGGED, SimConfig
from scheme_analyzing import SCHEMES, NetworkEnv
from throughput_optimizing import SweepGrid
from util import DomainError

COMMANDS = ("region", "optimize", "simulate", "compare")

SECTION_KEYS = {
    "sensing": ("mode", "p_fa", "p_md", "f_s", "snr"),
    "success": ("mode", "p_ppd", "p_ssd"),
    "sweep": (
        "lambda_p_points",
        "tau_points",
        "b_points",
        "tau_max_fraction",
        "tau_fixed",
        "p_fa_values",
    ),
    "sim": (
        "slots",
        "seed",
        "lambda_p",
        "lambda_s",
        "warmup_fraction",
        "tau",
        "a_s",
        "b_s",
    ),
}
TOP_LEVEL_KEYS = (
    "bits_per_packet",
    "slot_duration",
    "bandwidth",
    "snr_p_pd",
    "snr_s_sd",
    "mean_gain_p_pd",
    "mean_gain_s_sd",
    "scheme",
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    env: NetworkEnv
    command: str = "region"
    grid: SweepGrid = field(default_factory=SweepGrid)
    lambda_p_points: int = 50
    sim: SimConfig = field(default_factory=SimConfig)
    output_path: str = "results"
    scheme: str = "S2"
    # fractions of the slot duration at which fixed-tau curves are drawn
    tau_fixed: Tuple[float, ...] = (0.01, 0.1, 0.3)
    # false-alarm probabilities at which `optimize` also compares Sc and S2
    p_fa_values: Tuple[float, ...] = ()
    sim_tau: Optional[float] = None
    sim_a_s: Optional[float] = None
    sim_b_s: Optional[float] = None

    def __post_init__(self):
        """
        Validates the run configuration after initialization.

        Raises
        ------
        ConfigError
            If the command or scheme is unknown, a grid has fewer than two points,
        or a fixed sensing fraction lies outside [0, 1)."""
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got '{self.command}'")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got '{self.scheme}'")
        for key, points in (
            ("sweep.lambda_p_points", self.lambda_p_points),
            ("sweep.tau_points", self.grid.tau_points),
            ("sweep.b_points", self.grid.b_points),
        ):
            if points < 2:
                raise ConfigError(f"{key} must be at least 2, got {points}")
        if not self.tau_fixed:
            raise ConfigError("sweep.tau_fixed must list at least one fraction")
        for fraction in self.tau_fixed:
            if not 0.0 <= fraction < 1.0:
                raise ConfigError(
                    f"sweep.tau_fixed entries must lie in [0, 1), got {fraction}"
                )
        if self.sim_tau is not None and not 0.0 <= self.sim_tau < self.env.slot_duration:
            raise ConfigError(
                f"sim.tau must satisfy 0 <= tau < slot_duration, got {self.sim_tau}"
            )


def _number(doc: Dict[str, Any], key: str, dotted: str, default: Any = None) -> Any:
    if key in doc and doc[key] is None:
        raise ConfigError(f"{dotted} must be a number, got None")
    value = doc.get(key, default)
    if value is None:
        return None
    # YAML 1.1 reads exponents without a dot, like 1e-3, as strings
    if isinstance(value, bool):
        raise ConfigError(f"{dotted} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{dotted} must be a number, got {value!r}") from None


def _required(doc: Dict[str, Any], key: str, dotted: str) -> float:
    value = _number(doc, key, dotted)
    if value is None:
        raise ConfigError(f"{dotted} is required")
    return value


def _positive(doc: Dict[str, Any], key: str, dotted: str, default: float) -> float:
    value = _number(doc, key, dotted, default)
    if not value > 0.0 or value == float("inf"):
        raise ConfigError(f"{dotted} must be strictly positive, got {value}")
    return value


def _probability(
    doc: Dict[str, Any], key: str, dotted: str, default: Optional[float] = None
) -> Optional[float]:
    value = _number(doc, key, dotted, default)
    if value is not None and not 0.0 <= value <= 1.0:
        raise ConfigError(f"{dotted} must be a probability in [0, 1], got {value}")
    return value


def _count(doc: Dict[str, Any], key: str, dotted: str, default: int) -> int:
    value = _number(doc, key, dotted, default)
    if not math.isfinite(value) or value != int(value):
        raise ConfigError(f"{dotted} must be an integer, got {value}")
    return int(value)


def _section(doc: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = doc.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"{name} must be a mapping, got {section!r}")
    for key in section:
        if key not in SECTION_KEYS[name]:
            raise ConfigError(f"unknown config key '{name}.{key}'")
    return section


def _apply_overrides(doc: Dict[str, Any], overrides: Dict[str, Any]) -> None:
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.rpartition(".")
        if section:
            target = doc.get(section) or {}
            if not isinstance(target, dict):
                raise ConfigError(f"{section} must be a mapping, got {target!r}")
            target[key] = value
            doc[section] = target
        else:
            doc[key] = value


def _links(doc: Dict[str, Any], physical: bool) -> Tuple[LinkParams, LinkParams]:
    bits = _number(doc, "bits_per_packet", "bits_per_packet", 1000)
    if bits < 0.0:
        raise ConfigError(f"bits_per_packet must be nonnegative, got {bits}")
    slot = _positive(doc, "slot_duration", "slot_duration", 1e-3)
    bandwidth = _positive(doc, "bandwidth", "bandwidth", 1e6)
    links = []
    for suffix in ("p_pd", "s_sd"):
        snr_key = f"snr_{suffix}"
        if physical:
            _required(doc, snr_key, snr_key)
        links.append(
            LinkParams(
                bits_per_packet=bits,
                slot_duration=slot,
                bandwidth=bandwidth,
                snr=_positive(doc, snr_key, snr_key, 10.0),
                mean_gain=_positive(doc, f"mean_gain_{suffix}", f"mean_gain_{suffix}", 1.0),
            )
        )
    return links[0], links[1]


def _sensing(section: Dict[str, Any]) -> SensingModel:
    mode = section.get("mode", "exogenous")
    if mode not in ("exogenous", "roc"):
        raise ConfigError(f"sensing.mode must be 'exogenous' or 'roc', got '{mode}'")
    p_fa = _probability(section, "p_fa", "sensing.p_fa", 0.2)
    if mode == "exogenous":
        return SensingModel(
            mode=mode,
            p_fa=p_fa,
            p_md_exogenous=_probability(section, "p_md", "sensing.p_md", 0.3),
        )
    _required(section, "f_s", "sensing.f_s")
    _required(section, "snr", "sensing.snr")
    return SensingModel(
        mode=mode,
        p_fa=p_fa,
        p_md_exogenous=None,
        sampling_freq=_positive(section, "f_s", "sensing.f_s", None),
        sensing_snr=_positive(section, "snr", "sensing.snr", None),
    )


def _sim(section: Dict[str, Any]) -> SimConfig:
    slots = _count(section, "slots", "sim.slots", 1_000_000)
    if slots <= 0:
        raise ConfigError(f"sim.slots must be positive, got {slots}")
    seed = section.get("seed", 42)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"sim.seed must be a 64-bit unsigned integer, got {seed!r}")
    lambda_s: Union[float, str] = section.get("lambda_s", BACKLOGGED)
    if lambda_s != BACKLOGGED:
        lambda_s = _probability(section, "lambda_s", "sim.lambda_s")
    warmup_fraction = _number(section, "warmup_fraction", "sim.warmup_fraction", 0.1)
    if not 0.0 <= warmup_fraction < 1.0:
        raise ConfigError(
            f"sim.warmup_fraction must lie in [0, 1), got {warmup_fraction}"
        )
    warmup_slots = int(slots * warmup_fraction)
    if warmup_slots >= slots:
        raise ConfigError("sim.warmup_fraction leaves zero slots after warmup")
    return SimConfig(
        slots=slots,
        seed=seed,
        lambda_p=_probability(section, "lambda_p", "sim.lambda_p", 0.2),
        lambda_s=lambda_s,
        warmup_slots=warmup_slots,
    )


def parse_config(
    text: str,
    command: str = "region",
    output_path: str = "results",
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Parses a YAML run configuration into a validated `RunConfig`.

    Nested mappings give the dotted keys (`sensing.p_fa`, `sim.seed`, ...). Unknown
    keys are rejected and every missing or invalid value is reported with its
    dotted key. Values left out take their documented defaults.

    Parameters
    ----------
    text : str
        The YAML document.
    command : str, optional
        One of 'region', 'optimize', 'simulate', 'compare'.
    output_path : str, optional
        Directory receiving the emitted files.
    overrides : Optional[Dict[str, Any]], optional
        Values keyed by dotted config key that replace those of the document, e.g.
    command-line flags. None values are ignored.

    Returns
    -------
    RunConfig
        The validated configuration.

    Raises
    ------
    ConfigError
        If the document is malformed or any value is missing or invalid.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping of keys to values")
    _apply_overrides(doc, overrides or {})
    for key in doc:
        if key not in TOP_LEVEL_KEYS and key not in SECTION_KEYS:
            raise ConfigError(f"unknown config key '{key}'")

    sensing = _section(doc, "sensing")
    success = _section(doc, "success")
    sweep = _section(doc, "sweep")
    sim = _section(doc, "sim")

    success_mode = success.get("mode", "physical")
    if success_mode not in ("constant", "physical"):
        raise ConfigError(
            f"success.mode must be 'constant' or 'physical', got '{success_mode}'"
        )
    constant_p, constant_s = None, None
    if success_mode == "constant":
        _required(success, "p_ppd", "success.p_ppd")
        _required(success, "p_ssd", "success.p_ssd")
        constant_p = _probability(success, "p_ppd", "success.p_ppd")
        constant_s = _probability(success, "p_ssd", "success.p_ssd")

    primary_link, secondary_link = _links(doc, physical=success_mode == "physical")
    try:
        env = NetworkEnv(
            primary_link=primary_link,
            secondary_link=secondary_link,
            sensing=_sensing(sensing),
            success_mode=success_mode,
            constant_success_p=constant_p,
            constant_success_s=constant_s,
        )
        grid = SweepGrid(
            tau_points=_count(sweep, "tau_points", "sweep.tau_points", 101),
            b_points=_count(sweep, "b_points", "sweep.b_points", 101),
            tau_max_fraction=_number(
                sweep, "tau_max_fraction", "sweep.tau_max_fraction", 0.5
            ),
        )
        sim_config = _sim(sim)
    except DomainError as e:
        raise ConfigError(str(e)) from None

    tau_fixed = sweep.get("tau_fixed", (0.01, 0.1, 0.3))
    if not isinstance(tau_fixed, (list, tuple)):
        raise ConfigError(f"sweep.tau_fixed must be a list, got {tau_fixed!r}")
    tau_fixed = tuple(
        _number({"f": f}, "f", "sweep.tau_fixed") for f in tau_fixed
    )
    p_fa_values = sweep.get("p_fa_values", ())
    if not isinstance(p_fa_values, (list, tuple)):
        raise ConfigError(f"sweep.p_fa_values must be a list, got {p_fa_values!r}")
    p_fa_values = tuple(
        _probability({"p": p}, "p", "sweep.p_fa_values") for p in p_fa_values
    )

    return RunConfig(
        env=env,
        command=command,
        grid=grid,
        lambda_p_points=_count(sweep, "lambda_p_points", "sweep.lambda_p_points", 50),
        sim=sim_config,
        output_path=output_path,
        scheme=str(doc.get("scheme", "S2")),
        tau_fixed=tau_fixed,
        p_fa_values=p_fa_values,
        sim_tau=_number(sim, "tau", "sim.tau"),
        sim_a_s=_probability(sim, "a_s", "sim.a_s"),
        sim_b_s=_probability(sim, "b_s", "sim.b_s"),
    )


def load_config(
    path: str,
    command: str = "region",
    output_path: str = "results",
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config '{path}': {e}") from None
    return parse_config(text, command, output_path, overrides)
