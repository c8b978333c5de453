"""Command-line interface.

Subcommands: gen-data (write training datasets), train (fit and save GP
models), simulate (run one case and export the trace), compare (switched
vs single model, optionally over a seed sweep). Exit codes: 0 success,
2 bad configuration, 3 missing model or data file, 4 assumption violation
aborted a run. Set PURSUIT_LOG=debug|info|warning to control logging.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .backend import active_backend
from .config import (bound_from_config, load_config, pose_from_config,
                     profiles_from_config, scenario_from_config)
from .errors import (AssumptionViolation, ConfigError, GpPursuitError,
                     MissingArtifactError)
from .gpmodel import Dataset, GpModel
from .simulate import (bound_report, generate_training, mse, run_scenario,
                       train_single, train_switched)

log = logging.getLogger("gppursuit")


def _setup_logging():
    level = os.environ.get("PURSUIT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _datasets(cfg: dict, seed: int, data_dir=None) -> list[Dataset]:
    if data_dir is not None:
        out = []
        for k in range(len(cfg["profiles"])):
            path = Path(data_dir) / f"dataset_{k}.csv"
            if not path.exists():
                raise MissingArtifactError(f"dataset file {path} does not exist")
            out.append(Dataset.from_csv(path))
        return out
    tr = cfg["training"]
    return generate_training(profiles_from_config(cfg), tr["points_per_profile"],
                             tr["noise_std"], dt=cfg["dt"], seed=seed,
                             start=pose_from_config(tr["start"]))


def _train_kwargs(cfg: dict, seed: int, per_profile: bool) -> dict:
    # per-profile datasets come from one consistent field, so the known sensor
    # noise can be pinned; the combined dataset mixes fields and its effective
    # noise is unknown, so the single model always fits noise freely
    tr = cfg["training"]
    pin = per_profile and not tr["fit_noise"]
    return {"delta": cfg["bound"]["delta"],
            "alpha_bar": np.asarray(cfg["switching"]["alpha_bar"], dtype=float),
            "seed": seed, "restarts": tr["restarts"],
            "noise_std": tr["noise_std"] if pin else None}


def _load_models(cfg: dict, case: str, models_dir) -> list[GpModel]:
    d = Path(models_dir)
    names = (["model_single.json"] if case == "single"
             else [f"model_{k}.json" for k in range(len(cfg["profiles"]))])
    models = []
    for name in names:
        path = d / name
        if not path.exists():
            raise MissingArtifactError(f"model file {path} does not exist")
        models.append(GpModel.load(path))
    return models


def _summary(trace, scn) -> dict:
    rep = bound_report(trace)
    return {
        "backend": active_backend(),
        "mse": mse(trace),
        "final_error": float(trace.e_norm[-1]),
        "true_switches": trace.true_switches,
        "estimated_switches": trace.estimated_switches(),
        "events": [{"step": s, "code": c, "message": m} for s, c, m in trace.events],
        "bound": {"first_entry": rep.first_entry,
                  "fraction_inside": rep.fraction_inside,
                  "max_error_after_entry": rep.max_error_after_entry},
        "elapsed_seconds": trace.elapsed,
        "case": "switched" if scn.switched else "single",
        "seed": scn.seed,
    }


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    seed = cfg["seed"] if args.seed is None else args.seed
    out = Path(args.out or "data")
    out.mkdir(parents=True, exist_ok=True)
    for k, data in enumerate(_datasets(cfg, seed)):
        path = out / f"dataset_{k}.csv"
        data.to_csv(path)
        print(f"wrote {path} ({len(data)} points)")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = cfg["seed"] if args.seed is None else args.seed
    out = Path(args.out or "models")
    out.mkdir(parents=True, exist_ok=True)
    datasets = _datasets(cfg, seed, args.data)
    if args.single_model:
        model = train_single(datasets, **_train_kwargs(cfg, seed, False))
        items = [("model_single.json", model)]
    else:
        models = train_switched(datasets, **_train_kwargs(cfg, seed, True))
        items = [(f"model_{k}.json", m) for k, m in enumerate(models)]
    for name, model in items:
        path = out / name
        model.save(path)
        lml = ", ".join(f"{v:.2f}" for v in model.log_marginal_likelihood())
        print(f"wrote {path} (m={len(model.data)}, per-output lml: {lml})")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.duration is not None:
        if args.duration <= 0:
            raise ConfigError("--duration must be positive")
        cfg["duration"] = args.duration
    case = args.case or cfg["case"]
    if args.models:
        models = _load_models(cfg, case, args.models)
    else:
        datasets = _datasets(cfg, cfg["seed"])
        models = ([train_single(datasets, **_train_kwargs(cfg, cfg["seed"], False))]
                  if case == "single"
                  else train_switched(datasets, **_train_kwargs(cfg, cfg["seed"], True)))
    scn = scenario_from_config(cfg, models, case=case)
    trace = run_scenario(scn)
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    summary = _summary(trace, scn)
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    print(f"wrote {out / 'trace.csv'} and {out / 'summary.json'}")
    print(f"mse={summary['mse']:.4f} final_error={summary['final_error']:.2e} "
          f"switches(true)={len(summary['true_switches'])} "
          f"(estimated)={len(summary['estimated_switches'])}")
    return 0


def _compare_one(cfg: dict, seed: int) -> dict:
    datasets = _datasets(cfg, seed)
    switched = train_switched(datasets, **_train_kwargs(cfg, seed, True))
    single = train_single(datasets, **_train_kwargs(cfg, seed, False))
    cfg = {**cfg, "seed": seed}
    tr_sw = run_scenario(scenario_from_config(cfg, switched, case="switched"))
    tr_si = run_scenario(scenario_from_config(cfg, [single], case="single"))
    return {"seed": seed, "mse_switched": mse(tr_sw), "mse_single": mse(tr_si),
            "traces": (tr_sw, tr_si)}


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    base_seed = cfg["seed"] if args.seed is None else args.seed
    if args.duration is not None:
        if args.duration <= 0:
            raise ConfigError("--duration must be positive")
        cfg["duration"] = args.duration
    seeds = list(range(base_seed, base_seed + max(1, args.sweep)))
    if args.jobs > 1 and len(seeds) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_compare_one, [cfg] * len(seeds), seeds))
    else:
        results = [_compare_one(cfg, s) for s in seeds]

    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    improvements = []
    lines = ["seed,mse_single,mse_switched,improvement_percent"]
    for res in results:
        imp = 100.0 * (res["mse_single"] - res["mse_switched"]) / res["mse_single"]
        improvements.append(imp)
        lines.append(f"{res['seed']},{res['mse_single']!r},"
                     f"{res['mse_switched']!r},{imp!r}")
        print(f"seed {res['seed']}: mse single={res['mse_single']:.4f} "
              f"switched={res['mse_switched']:.4f} improvement={imp:.2f}%")
    (out / "comparison.csv").write_text("\n".join(lines) + "\n")
    if len(seeds) == 1:
        tr_sw, tr_si = results[0]["traces"]
        tr_sw.to_csv(out / "trace_switched.csv")
        tr_si.to_csv(out / "trace_single.csv")
    wins = sum(1 for r in results if r["mse_switched"] < r["mse_single"])
    print(f"switched model wins on {wins}/{len(seeds)} seeds; "
          f"mean improvement {np.mean(improvements):.2f}%")
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="gppursuit",
        description="Visual pursuit with switched Gaussian-process motion models")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (defaults built in)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("gen-data", help="write training datasets as CSV")
    common(p)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="fit GP models and save them")
    common(p)
    p.add_argument("--data", help="load datasets from this directory "
                                  "instead of generating them")
    p.add_argument("--single-model", action="store_true",
                   help="fit one model on all profiles' data")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("simulate", help="run one closed-loop case")
    common(p)
    p.add_argument("--case", choices=("switched", "single"))
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--models", help="directory with saved model files "
                                    "(default: train in memory)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("compare", help="switched vs single model")
    common(p)
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--sweep", type=int, default=1,
                   help="number of consecutive seeds to compare")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers for the seed sweep")
    p.set_defaults(fn=cmd_compare)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except AssumptionViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except GpPursuitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
