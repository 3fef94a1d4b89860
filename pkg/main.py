"""
DP Minimax - Main Application

Runs differentially private GDA experiments from a JSON config and writes
CSV results to the output directory. Progress goes to stderr.

Subcommands: calibrate, run, stability, generalization, noise-check, bounds.
Exit codes: 0 success, 2 config error, 3 non-convergence, 4 privacy failure.
"""

import argparse
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from bounds import BoundInputs, cor1a_strong_gen, cor1b_weak_pop, cor1c_weak_gen, evaluate, \
    theorem2_gamma, thm3a_plain, thm3b_primal, thm3c_excess, thm3d_strong_pd
from config import ExperimentConfig, load_config
from errors import ConfigError, DpMinimaxError, PrivacyVerificationError
from numerics import RngState, derive_seed, noise_exceedance
from optimizer import Schedule, run
from privacy import PrivacyBudget, calibrate_sigma
from problem import build_instance, empirical_loss, eval_set, gen_dataset
from risk import g_distances, primal_excess, risk_report, strong_pd, weak_pd
from stability import empirical_gamma, loglog_slope
from storage import Storage, format_value
from workers import parallel_map, resolve_workers

logger = logging.getLogger("dpminimax")

COMMANDS = ("calibrate", "run", "stability", "generalization", "noise-check", "bounds")

GENERALIZATION_SCHEMA = "generalization@3"
GENERALIZATION_COLUMNS = [
    "n", "T", "sigma", "replicate", "plain_gap", "primal_gap", "strong_pd_pop", "weak_pd_pop",
    "bound_3a", "bound_3b", "bound_3d", "bound_c1b", "gamma_theoretical",
    "strong_pd_emp", "primal_excess", "bound_3c", "bound_c1a", "bound_c1c", "weak_pd_emp",
]
CALIBRATE_COLUMNS = ["n", "T", "G", "epsilon", "delta", "c", "sigma", "achieved_delta",
                     "lambda_star", "valid", "delta_w", "delta_v"]
STABILITY_COLUMNS = ["n", "T", "sigma", "index", "replacement", "distance", "g_w", "g_v", "gamma"]
STABILITY_SUMMARY_COLUMNS = ["n", "T", "sigma", "samples", "max_distance", "q50", "q90", "q99",
                             "theoretical_gamma", "crude_gamma", "containment_rate"]
NOISE_CHECK_COLUMNS = ["sigma", "p", "zeta", "draws", "threshold", "exceed_fraction", "allowed", "passed"]


def _train_seed(config: ExperimentConfig, n: int, replicate: int) -> int:
    return derive_seed(config.seed, f"train/{n}/{replicate}")


def _noise_rng(config: ExperimentConfig, n: int, replicate: int) -> RngState:
    return RngState(derive_seed(config.seed, f"noise/{n}/{replicate}"))


def noise_plan(config: ExperimentConfig, inst, n: int, T: int, require_valid: bool = True):
    """Calibrated plan for a private config, None for a noiseless one"""
    if not config.private:
        return None
    plan = calibrate_sigma(inst.lipschitz, T, n, PrivacyBudget(config.epsilon, config.delta), config.c)
    if require_valid and not plan.valid:
        raise PrivacyVerificationError(
            f"sigma={plan.sigma:.6g} for n={n}, T={T} reaches delta={plan.achieved_delta:.3e} "
            f"> {config.delta:g}; raise c"
        )
    return plan


def _bound_inputs(config, inst, n, T, sigma, g_w=0.0, g_v=0.0, delta_s_emp=0.0) -> BoundInputs:
    return BoundInputs(G=inst.lipschitz, rho=inst.rho, L=inst.smooth, M_ell=inst.loss_bound,
                       M_W=inst.radius_w, M_V=inst.radius_v, sigma=sigma, T=T, n=n, p=inst.p,
                       epsilon=config.epsilon, delta=config.delta, zeta=config.zeta, iota=config.iota,
                       g_w=g_w, g_v=g_v, delta_s_emp=delta_s_emp, phi=config.phi)


# -- calibrate ------------------------------------------------------------------

def cmd_calibrate(config: ExperimentConfig, storage: Storage, workers: int = 1) -> int:
    """Noise plan per n as key=value blocks on stdout and calibrate.csv"""
    inst = build_instance(config.instance, config.seed)
    rows = []
    for n in config.n:
        T = config.iterations(n)
        plan = calibrate_sigma(inst.lipschitz, T, n, PrivacyBudget(config.epsilon, config.delta), config.c)
        row = {
            "n": n, "T": T, "G": plan.G, "epsilon": config.epsilon, "delta": config.delta,
            "c": plan.c, "sigma": plan.sigma, "achieved_delta": plan.achieved_delta,
            "lambda_star": plan.lambda_star, "valid": plan.valid,
            "delta_w": plan.stream_delta["w"], "delta_v": plan.stream_delta["v"],
        }
        rows.append(row)
        print("\n".join(f"{key}={format_value(row[key])}" for key in CALIBRATE_COLUMNS))
        print()
    path = storage.write_csv("calibrate.csv", "calibrate@1", CALIBRATE_COLUMNS, rows)
    logger.info("[Calibrate] wrote %s", path)
    invalid = [row["n"] for row in rows if not row["valid"]]
    if invalid:
        raise PrivacyVerificationError(f"calibrated sigma fails the accountant for n={invalid}")
    return 0


# -- run ------------------------------------------------------------------------

def cmd_run(config: ExperimentConfig, storage: Storage, workers: int = 1) -> int:
    """One training run per n; summary, dataset and (optionally) trajectory CSVs"""
    inst = build_instance(config.instance, config.seed)
    columns = ["n", "T", "sigma", "loss_emp", "strong_pd_emp", "g_w", "g_v"] \
        + [f"w_{k}" for k in range(inst.dim_w)] + [f"v_{k}" for k in range(inst.dim_v)]
    with storage.open_csv("run.csv", "run@1", columns) as out:
        for n in config.n:
            T = config.iterations(n)
            plan = noise_plan(config, inst, n, T)
            S = gen_dataset(inst, n, _train_seed(config, n, 0))
            storage.save_dataset(f"dataset_n{n}.csv", S)
            traj = run(inst, S, T, Schedule(inst.rho, config.phi), plan, _noise_rng(config, n, 0),
                       retain_iterates=config.retain_iterates)
            if config.retain_iterates:
                storage.save_trajectory(f"trajectory_n{n}.csv", traj)
            g_w, g_v = g_distances(inst, traj, S, config.tol, config.max_iter)
            row = {
                "n": n, "T": T, "sigma": traj.sigma,
                "loss_emp": empirical_loss(inst, traj.avg_w, traj.avg_v, S),
                "strong_pd_emp": strong_pd(inst, traj.avg_w, traj.avg_v, S, config.tol, config.max_iter),
                "g_w": g_w, "g_v": g_v,
            }
            row.update({f"w_{k}": float(x) for k, x in enumerate(traj.avg_w)})
            row.update({f"v_{k}": float(x) for k, x in enumerate(traj.avg_v)})
            out.append(row)
            logger.info("[Run] n=%d T=%d sigma=%.4g strong_pd_emp=%.4g", n, T, traj.sigma, row["strong_pd_emp"])
    return 0


# -- stability ------------------------------------------------------------------

def cmd_stability(config: ExperimentConfig, storage: Storage, workers: int = 1) -> int:
    """Coupled-run argument stability across the n sweep"""
    inst = build_instance(config.instance, config.seed)
    maxima = []
    with storage.open_csv("stability.csv", "stability@1", STABILITY_COLUMNS) as samples_out, \
            storage.open_csv("stability_summary.csv", "stability_summary@1", STABILITY_SUMMARY_COLUMNS) as summary_out:
        for n in config.n:
            T = config.iterations(n)
            plan = noise_plan(config, inst, n, T)
            S = gen_dataset(inst, n, _train_seed(config, n, 0))
            report = empirical_gamma(
                inst, S, T, Schedule(inst.rho, config.phi), plan,
                num_indices=min(config.stability_indices, n),
                num_replacements=config.stability_replacements,
                rng=RngState(derive_seed(config.seed, f"stability/{n}")),
                zeta=config.zeta, tol=config.tol, workers=workers,
            )
            for sample in report.samples:
                samples_out.append(dict(sample, n=n, T=T, sigma=report.sigma))
            summary_out.append({
                "n": n, "T": T, "sigma": report.sigma, "samples": len(report.samples),
                "max_distance": report.max_distance, "q50": report.quantiles[0.5],
                "q90": report.quantiles[0.9], "q99": report.quantiles[0.99],
                "theoretical_gamma": report.theoretical_gamma, "crude_gamma": report.crude_gamma,
                "containment_rate": report.containment_rate,
            })
            maxima.append(report.max_distance)
    if len(config.n) > 1 and all(m > 0 for m in maxima):
        logger.info("[Stability] log-log slope of max distance vs n: %.3f", loglog_slope(config.n, maxima))
    return 0


# -- generalization ---------------------------------------------------------------

def _generalization_cell(task) -> dict:
    inst, config, n, T, plan, r, E = task
    S = gen_dataset(inst, n, _train_seed(config, n, r))
    traj = run(inst, S, T, Schedule(inst.rho, config.phi), plan, _noise_rng(config, n, r))
    report = risk_report(inst, traj.avg_w, traj.avg_v, S, E, config.tol, config.max_iter)
    g_w, g_v = g_distances(inst, traj, S, config.tol, config.max_iter)
    return {
        "replicate": r, "S": S, "w": traj.avg_w, "v": traj.avg_v, "sigma": traj.sigma,
        "plain_emp": report.plain_emp, "plain_pop": report.plain_pop,
        "plain_gap": report.plain_gap, "primal_gap": report.primal_gap,
        "strong_pd_pop": report.strong_pd_pop, "strong_pd_emp": report.strong_pd_emp,
        "primal_excess": primal_excess(inst, traj.avg_w, E, config.tol, config.max_iter),
        "g_w": g_w, "g_v": g_v,
    }


def _generalization_rows(config, inst, n, T, cells, weak_pop, weak_emp) -> list:
    expect = float(np.mean([cell["strong_pd_emp"] for cell in cells]))
    rows = []
    for cell in cells:
        x = _bound_inputs(config, inst, n, T, cell["sigma"], cell["g_w"], cell["g_v"], cell["strong_pd_emp"])
        gamma = theorem2_gamma(x)
        args = (gamma, x.G, x.M_ell, n, x.iota, x.zeta)
        pd_args = args + (x.L, x.rho)
        rows.append({
            "n": n, "T": T, "sigma": cell["sigma"], "replicate": cell["replicate"],
            "plain_gap": cell["plain_gap"], "primal_gap": cell["primal_gap"],
            "strong_pd_pop": cell["strong_pd_pop"], "weak_pd_pop": weak_pop,
            "bound_3a": thm3a_plain(*args),
            "bound_3b": thm3b_primal(*pd_args),
            "bound_3d": thm3d_strong_pd(*pd_args, cell["strong_pd_emp"], expect),
            "bound_c1b": cor1b_weak_pop(*pd_args, cell["strong_pd_emp"]),
            "gamma_theoretical": gamma,
            "strong_pd_emp": cell["strong_pd_emp"], "primal_excess": cell["primal_excess"],
            "bound_3c": thm3c_excess(*pd_args, cell["strong_pd_emp"]),
            "bound_c1a": cor1a_strong_gen(*pd_args, expect),
            "bound_c1c": cor1c_weak_gen(*pd_args, cell["strong_pd_emp"]),
            "weak_pd_emp": weak_emp,
        })
    return rows


def cmd_generalization(config: ExperimentConfig, storage: Storage, workers: int = 1) -> int:
    """Risks and matching bounds, one row per (n, replicate) in that order"""
    inst = build_instance(config.instance, config.seed)
    E = eval_set(inst, config.n_eval, config.seed)
    medians = []
    with storage.open_csv("generalization.csv", GENERALIZATION_SCHEMA, GENERALIZATION_COLUMNS) as out:
        for n in config.n:
            T = config.iterations(n)
            plan = noise_plan(config, inst, n, T)
            tasks = [(inst, config, n, T, plan, r, E) for r in range(config.replicates)]
            cells = parallel_map(_generalization_cell, tasks, workers)
            pairs = [(cell["w"], cell["v"]) for cell in cells]
            weak_pop = weak_pd(inst, pairs, E, config.tol, config.max_iter, min_replicates=1)
            weak_emp = weak_pd(inst, pairs, [cell["S"] for cell in cells], config.tol, config.max_iter,
                               min_replicates=1)
            out.extend(_generalization_rows(config, inst, n, T, cells, weak_pop, weak_emp))
            median_gap = float(np.median([abs(cell["plain_gap"]) for cell in cells]))
            medians.append(median_gap)
            logger.info("[Generalization] n=%d T=%d replicates=%d median |plain gap|=%.4g weak_pd_emp=%.4g "
                        "weak_pd_pop=%.4g",
                        n, T, len(cells), median_gap, weak_emp, weak_pop)
    if len(config.n) > 1 and all(m > 0 for m in medians):
        logger.info("[Generalization] log-log slope of median plain gap vs n: %.3f", loglog_slope(config.n, medians))
    return 0


# -- noise-check ------------------------------------------------------------------

def cmd_noise_check(config: ExperimentConfig, storage: Storage, workers: int = 1) -> int:
    """Empirical exceedance of the noise-norm threshold"""
    check = config.noise_check
    fraction, threshold, _ = noise_exceedance(check["sigma"], check["p"], check["zeta"], check["draws"],
                                              RngState(derive_seed(config.seed, "noise-check")))
    allowed = check["zeta"] + 3.0 * math.sqrt(check["zeta"] * (1 - check["zeta"]) / check["draws"])
    row = dict(check, threshold=threshold, exceed_fraction=fraction, allowed=allowed, passed=fraction <= allowed)
    storage.write_csv("noise_check.csv", "noise_check@1", NOISE_CHECK_COLUMNS, [row])
    print("\n".join(f"{key}={format_value(row[key])}" for key in NOISE_CHECK_COLUMNS))
    logger.info("[NoiseCheck] exceedance %.5f (allowed %.5f)", fraction, allowed)
    return 0


# -- bounds -----------------------------------------------------------------------

def cmd_bounds(config: ExperimentConfig, storage: Storage, workers: int = 1) -> int:
    """Evaluate the configured bound and echo its inputs"""
    name = config.bound["name"]
    try:
        inputs = BoundInputs.from_dict(config.bound["inputs"])
    except TypeError as e:
        raise ConfigError("bound.inputs", str(e))
    value = evaluate(name, inputs)
    lines = [f"{name}={format_value(value)}"]
    lines += [f"{key}={format_value(val)}" for key, val in inputs.as_dict().items()]
    text = "\n".join(lines) + "\n"
    storage.write_text("bounds.txt", text)
    print(text, end="")
    return 0


HANDLERS = {
    "calibrate": cmd_calibrate,
    "run": cmd_run,
    "stability": cmd_stability,
    "generalization": cmd_generalization,
    "noise-check": cmd_noise_check,
    "bounds": cmd_bounds,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON experiment config (defaults when omitted)")
    shared.add_argument("--out", help="output directory (overrides output_dir)")
    shared.add_argument("--workers", type=int, help="parallel worker processes (fallback: DPMINIMAX_WORKERS)")
    shared.add_argument("--seed", type=int, help="64-bit seed (overrides seed)")
    shared.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="dpminimax", description="DP-GDA minimax experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub.add_parser(command, parents=[shared], help=HANDLERS[command].__doc__)
    return parser


def setup_logging(verbose: bool = False):
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if verbose else logging.INFO,
                        format="%(message)s", force=True)


def main(argv=None) -> int:
    """Entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed", "must be a 64-bit unsigned integer")
            config = replace(config, seed=args.seed)
        if args.out is not None:
            config = replace(config, output_dir=args.out)
        workers = resolve_workers(args.workers, config.workers)

        logger.info("=" * 50)
        logger.info("DP Minimax - %s (seed %d, %d worker%s)", args.command, config.seed, workers,
                    "" if workers == 1 else "s")
        logger.info("=" * 50)

        storage = Storage(config.output_dir)
        return HANDLERS[args.command](config, storage, workers)
    except DpMinimaxError as e:
        logger.error("[Error] %s", e)
        return e.exit_code
    except KeyboardInterrupt:
        logger.error("\nInterrupted by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
