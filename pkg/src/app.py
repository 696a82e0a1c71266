import dataclasses
import os
from typing import Callable, Dict, List, Sequence

import structlog

import report_writing as rw
import throughput_optimizing as to
from cfg import RunConfig
from queue_simulating import simulate
from scheme_analyzing import SCHEMES, AccessPolicy, NetworkEnv
from throughput_optimizing import RegionCurve, RegionRow
from util import uniform_grid

logger = structlog.get_logger(__name__)


class ThroughputStudy:
    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.commands = self._build_commands()

    def _build_commands(self) -> Dict[str, Callable[[], List[str]]]:
        return {
            "region": self._run_region,
            "optimize": self._run_optimize,
            "simulate": self._run_simulate,
            "compare": self._run_compare,
        }

    def _path(self, name: str) -> str:
        return os.path.join(self.config.output_path, name)

    def _shared_lambda_p(
        self, envs: Sequence[NetworkEnv], schemes: Sequence[str]
    ) -> List[float]:
        grid = self.config.grid
        lambda_max = max(
            to.max_feasible_lambda_p(scheme, env, grid) for env in envs for scheme in schemes
        )
        return [
            float(x)
            for x in uniform_grid(0.0, min(lambda_max, 1.0), self.config.lambda_p_points)
        ]

    def _curve_on(
        self, scheme: str, env: NetworkEnv, lambda_p_values: Sequence[float]
    ) -> RegionCurve:
        rows = []
        for lambda_p in lambda_p_values:
            optimum = to.maximize_scheme(scheme, env, lambda_p, self.config.grid)
            rows.append(
                RegionRow(lambda_p, optimum.lambda_s_max, optimum.policy, optimum.feasible)
            )
        return RegionCurve(scheme=scheme, env_digest=env.digest(), rows=rows)

    def _run_region(self) -> List[str]:
        """
        Samples the boundary of every scheme, plus S_2 boundaries at the fixed
        sensing durations, and writes one CSV per curve family and a plot script.

        Returns
        -------
        List[str]
            Paths of the written files.
        """
        config = self.config
        written = []
        for scheme in SCHEMES:
            curve = to.region_curve(scheme, config.env, config.lambda_p_points, config.grid)
            written.append(
                rw.write_frame(rw.region_frame([curve]), self._path(f"region_{scheme}.csv"))
            )

        sweeps = [
            to.tau_sweep_curve(
                config.env,
                fraction * config.env.slot_duration,
                config.lambda_p_points,
                config.grid.b_points,
            )
            for fraction in config.tau_fixed
        ]
        written.append(
            rw.write_frame(rw.region_frame(sweeps), self._path("tau_sweep_S2.csv"))
        )
        names = [os.path.basename(path) for path in written]
        written.append(rw.write_plot_script(config.output_path, names))
        return written

    def _run_optimize(self) -> List[str]:
        config = self.config
        curve = to.region_curve(
            config.scheme, config.env, config.lambda_p_points, config.grid
        )
        csv = rw.write_frame(
            rw.optimize_frame(curve), self._path(f"optimize_{config.scheme}.csv")
        )
        written = [csv]
        if config.p_fa_values:
            written.append(self._compare_false_alarm())
        names = [os.path.basename(path) for path in written]
        written.append(rw.write_plot_script(config.output_path, names))
        return written

    def _compare_false_alarm(self) -> str:
        """
        Optimizes Sc and S_2 on one shared λ_p grid for every configured
        false-alarm probability and writes them to `optimize_pfa.csv`.
        """
        config = self.config
        envs = [
            dataclasses.replace(
                config.env, sensing=dataclasses.replace(config.env.sensing, p_fa=p_fa)
            )
            for p_fa in config.p_fa_values
        ]
        lambda_p_values = self._shared_lambda_p(envs, ("Sc", "S2"))
        curves = []
        for p_fa, env in zip(config.p_fa_values, envs):
            for scheme in ("Sc", "S2"):
                curves.append((p_fa, self._curve_on(scheme, env, lambda_p_values)))
            logger.debug("Optimized at false-alarm probability", p_fa=p_fa)
        return rw.write_frame(rw.pfa_frame(curves), self._path("optimize_pfa.csv"))

    def _simulation_policy(self) -> AccessPolicy:
        """
        Builds the policy to simulate: knobs given in the configuration are used as
        they are, the rest come from the optimum of the configured scheme at the
        simulated primary arrival rate.
        """
        config = self.config
        optimum = to.maximize_scheme(
            config.scheme, config.env, config.sim.lambda_p, config.grid
        )
        if not optimum.feasible:
            logger.warning(
                "No stable policy at the simulated primary rate",
                scheme=config.scheme,
                lambda_p=config.sim.lambda_p,
            )
        policy = optimum.policy
        return AccessPolicy(
            config.scheme,
            tau=policy.tau if config.sim_tau is None else config.sim_tau,
            a_s=policy.a_s if config.sim_a_s is None else config.sim_a_s,
            b_s=policy.b_s if config.sim_b_s is None else config.sim_b_s,
        )

    def _run_simulate(self) -> List[str]:
        config = self.config
        policy = self._simulation_policy()
        report = simulate(config.env, policy, config.sim)
        logger.info(
            "Simulation finished",
            scheme=policy.scheme,
            verdict=report.stability_verdict,
            mu_p=report.empirical_mu_p,
            mu_s=report.empirical_mu_s,
        )
        frame = rw.simulation_frame(report, policy, config.sim)
        return [rw.write_frame(frame, self._path("simulate.csv"))]

    def _run_compare(self) -> List[str]:
        """
        Evaluates every scheme on one shared λ_p grid, the best scheme at each
        point and the sensing crossover flags between the shortest and the longest
        fixed sensing durations.

        Returns
        -------
        List[str]
            Paths of the written files.
        """
        config = self.config
        env, grid = config.env, config.grid
        lambda_p_values = self._shared_lambda_p([env], SCHEMES)
        curves = [self._curve_on(scheme, env, lambda_p_values) for scheme in SCHEMES]
        winners = [to.best_scheme(env, lambda_p, grid) for lambda_p in lambda_p_values]

        written = [
            rw.write_frame(rw.region_frame(curves), self._path("compare.csv")),
            rw.write_frame(
                rw.switching_frame(lambda_p_values, winners), self._path("switching.csv")
            ),
        ]

        taus = sorted({fraction * env.slot_duration for fraction in config.tau_fixed})
        if len(taus) >= 2:
            flags = [
                to.crossover_flags(env, lambda_p, taus[0], taus[-1], grid.b_points)
                for lambda_p in lambda_p_values
            ]
            written.append(
                rw.write_frame(rw.crossover_frame(flags), self._path("crossover.csv"))
            )
        else:
            logger.warning(
                "Crossover flags need two distinct fixed sensing durations",
                tau_fixed=config.tau_fixed,
            )
        written.append(
            rw.write_plot_script(config.output_path, ["compare.csv"], "switching.csv")
        )
        return written

    def run_app(self) -> List[str]:
        """
        Runs the configured command and writes its outputs under the configured
        output directory.

        Returns
        -------
        List[str]
            Paths of all files written by the command.
        """
        config = self.config
        logger.info(
            "Running command",
            command=config.command,
            env=config.env.digest(),
            output_path=config.output_path,
        )
        written = self.commands[config.command]()
        logger.info("Command finished", command=config.command, files=len(written))
        return written
