import dataclasses
import os
from typing import List, Sequence, Tuple

import pandas as pd
import structlog

from queue_simulating import SimConfig, SimReport
from scheme_analyzing import AccessPolicy
from throughput_optimizing import BestScheme, CrossoverFlags, RegionCurve

logger = structlog.get_logger(__name__)

REGION_COLUMNS = ["scheme", "lambda_p", "lambda_s_max", "tau", "a_s", "b_s", "feasible"]
OPTIMIZE_COLUMNS = ["scheme", "lambda_p", "tau", "a_s", "b_s", "lambda_s_max", "feasible"]
PFA_COLUMNS = ["p_fa"] + OPTIMIZE_COLUMNS
# twelve significant digits keeps every value above the nine-digit floor
FLOAT_FORMAT = "%.12g"
PLOT_SCRIPT_NAME = "plot_regions.py"


def region_frame(curves: Sequence[RegionCurve]) -> pd.DataFrame:
    records = []
    for curve in curves:
        for row in curve.rows:
            records.append(
                {
                    "scheme": curve.scheme,
                    "lambda_p": row.lambda_p,
                    "lambda_s_max": row.lambda_s_max,
                    "tau": row.policy.tau,
                    "a_s": row.policy.a_s,
                    "b_s": row.policy.b_s,
                    "feasible": row.feasible,
                }
            )
    return pd.DataFrame.from_records(records, columns=REGION_COLUMNS)


def optimize_frame(curve: RegionCurve) -> pd.DataFrame:
    return region_frame([curve])[OPTIMIZE_COLUMNS]


def pfa_frame(curves: Sequence[Tuple[float, RegionCurve]]) -> pd.DataFrame:
    """Stacks optimize frames, each tagged with the false-alarm probability it used."""
    frames = []
    for p_fa, curve in curves:
        frame = optimize_frame(curve)
        frame.insert(0, "p_fa", p_fa)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=PFA_COLUMNS)
    return pd.concat(frames, ignore_index=True)[PFA_COLUMNS]


def switching_frame(
    lambda_p_values: Sequence[float], winners: Sequence[BestScheme]
) -> pd.DataFrame:
    records = [
        {
            "scheme": best.scheme,
            "lambda_p": float(lambda_p),
            "lambda_s_max": best.lambda_s_max,
            "tau": best.policy.tau,
            "a_s": best.policy.a_s,
            "b_s": best.policy.b_s,
            "feasible": best.feasible,
        }
        for lambda_p, best in zip(lambda_p_values, winners)
    ]
    return pd.DataFrame.from_records(records, columns=REGION_COLUMNS)


def crossover_frame(flags: Sequence[CrossoverFlags]) -> pd.DataFrame:
    return pd.DataFrame.from_records(
        [f._asdict() for f in flags], columns=list(CrossoverFlags._fields)
    )


def simulation_frame(
    report: SimReport, policy: AccessPolicy, cfg: SimConfig
) -> pd.DataFrame:
    record = {
        "scheme": policy.scheme,
        "tau": policy.tau,
        "a_s": policy.a_s,
        "b_s": policy.b_s,
        "lambda_p": cfg.lambda_p,
        "lambda_s": cfg.lambda_s,
        "slots": cfg.slots,
        "warmup_slots": cfg.warmup_slots,
    }
    record.update(dataclasses.asdict(report))
    return pd.DataFrame([record])


def write_frame(frame: pd.DataFrame, path: str) -> str:
    """
    Writes a report frame as CSV with a fixed column order and fixed float
    formatting, so equal frames always give byte-identical files.

    Parameters
    ----------
    frame : pd.DataFrame
        The report rows.
    path : str
        Destination file; its directory is created when missing.

    Returns
    -------
    str
        The written path.
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote report", path=path, rows=len(frame))
    return path


def plot_script(region_csvs: List[str], switching_csv: str = None) -> str:
    """
    Renders a standalone matplotlib script that draws the boundary curves stored in
    the given CSV files. File names are relative to the script's directory.
    """
    lines = [
        "import os",
        "",
        "import matplotlib.pyplot as plt",
        "import pandas as pd",
        "",
        "HERE = os.path.dirname(os.path.abspath(__file__))",
        f"REGION_CSVS = {sorted(region_csvs)!r}",
        f"SWITCHING_CSV = {switching_csv!r}",
        "",
        "",
        "def main():",
        "    fig, ax = plt.subplots(figsize=(7, 5))",
        "    for name in REGION_CSVS:",
        "        frame = pd.read_csv(os.path.join(HERE, name))",
        "        if name.startswith('tau_sweep'):",
        "            for (scheme, tau), curve in frame.groupby(['scheme', 'tau']):",
        "                label = f'{scheme}, tau={tau:.3g} s'",
        "                ax.plot(curve['lambda_p'], curve['lambda_s_max'], '--', label=label)",
        "        elif name.startswith('optimize_pfa'):",
        "            for (scheme, p_fa), curve in frame.groupby(['scheme', 'p_fa']):",
        "                label = f'{scheme}, P_FA={p_fa:.3g}'",
        "                ax.plot(curve['lambda_p'], curve['lambda_s_max'], '-.', label=label)",
        "        else:",
        "            for scheme, curve in frame.groupby('scheme'):",
        "                ax.plot(curve['lambda_p'], curve['lambda_s_max'], '-', label=scheme)",
        "    if SWITCHING_CSV is not None:",
        "        frame = pd.read_csv(os.path.join(HERE, SWITCHING_CSV))",
        "        ax.plot(frame['lambda_p'], frame['lambda_s_max'], 'k:', label='switching')",
        "    ax.set_xlabel('primary arrival rate (packets/slot)')",
        "    ax.set_ylabel('maximum stable secondary rate (packets/slot)')",
        "    ax.set_xlim(left=0.0)",
        "    ax.set_ylim(bottom=0.0)",
        "    ax.legend()",
        "    ax.grid(True, alpha=0.3)",
        "    fig.tight_layout()",
        "    plt.show()",
        "",
        "",
        "if __name__ == '__main__':",
        "    main()",
        "",
    ]
    return "\n".join(lines)


def write_plot_script(
    directory: str, region_csvs: List[str], switching_csv: str = None
) -> str:
    path = os.path.join(directory, PLOT_SCRIPT_NAME)
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write(plot_script(region_csvs, switching_csv))
    logger.info("Wrote plot script", path=path)
    return path
