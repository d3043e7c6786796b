"""Command-line entry point: ``batterbot <command> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import sim
from .config import ConfigError, RunConfig, format_length, parse_length
from .control import (
    ControlModel,
    ModelFormatError,
    TrainConfig,
    load_dataset,
    save_dataset,
    speed_dataset,
    time_dataset,
    train_control_model,
)
from .eval import (
    ratio_training_data,
    run_line_experiment,
    run_perception_experiment,
    run_round_experiment,
    simulate_pour,
    train_ratio_model,
)
from .perception import (
    PerceptionError,
    RatioModel,
    TorqueCurve,
    default_jump_threshold,
    estimate_level,
    estimate_ratio,
    fit_ratio_model,
    perceive,
    stir_until_uniform,
)
from .planner import (
    BinaryMask,
    PGMParseError,
    PlanningError,
    Trajectory,
    load_pgm,
    plan_trajectory,
    write_pgm,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
BOWLS = {"small": sim.SMALL_BOWL, "large": sim.LARGE_BOWL}


# ----------------------------------------------------------------- helpers


def _load(fn, path, what):
    """Read an input file; any failure is an input error (exit 2)."""
    if not Path(path).exists():
        raise ConfigError(f"{what} not found: {path}")
    try:
        return fn(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}") from None


def _length(text, cfg, name, lo=0.0, hi=1.0):
    value = parse_length(text, cfg.units)
    if not lo < value <= hi:
        raise ConfigError(f"{name} {text!r} = {value:g} m is outside ({lo:g}, {hi:g}] m; "
                          "add a unit suffix such as mm or cm")
    return value


def _ratio(value):
    if not 0.5 <= value <= 3.0:
        raise ConfigError(f"ratio {value} outside [0.5, 3.0]")
    return value


def _ratio_list(text):
    """'1.0:1.5:0.05' (inclusive range) or '1.0,1.1,1.2'."""
    try:
        if ":" in text:
            a, b, s = (float(v) for v in text.split(":"))
            if s <= 0 or b < a:
                raise ValueError
            out = np.round(np.arange(a, b + s / 2, s), 6)
        else:
            out = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse ratio list {text!r}") from None
    if len(out) < 2 or len(set(out.tolist())) != len(out):
        raise ConfigError("need at least two distinct ratios")
    for r in out:
        _ratio(r)
    return tuple(sorted(out.tolist()))


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _speed_model(args, cfg, params):
    if args.speed_model:
        return _load(ControlModel.load, args.speed_model, "speed model")
    return train_control_model(speed_dataset(params, seed=cfg.seed), "speed",
                               TrainConfig(seed=cfg.seed))[0]


def _ratio_model(args, cfg, params):
    if getattr(args, "model", None):
        model = _load(RatioModel.load, args.model, "ratio model")
    else:
        model = train_ratio_model(params, seed=cfg.seed)
    return model.with_mode(cfg.weighting_mode)


def _jump(cfg, params):
    return cfg.jump_threshold if cfg.jump_threshold is not None else default_jump_threshold(params)


# ----------------------------------------------------------------- commands


def cmd_gen_data(args, cfg, params):
    ratios = _ratio_list(args.ratios)
    if args.pushes < 4:
        raise ConfigError("--pushes must be at least 4")
    out = Path(args.out or cfg.dataset_dir)

    def run():
        heights = np.linspace(0.003, 0.063, args.pushes)
        training = ratio_training_data(params, ratios, heights, seed=cfg.seed)
        (out / "torque").mkdir(parents=True, exist_ok=True)
        manifest = []
        for r, curve, level in training:
            name = f"torque/ratio_{r:.2f}.csv"
            curve.to_csv(out / name)
            manifest.append({"ratio": r, "curve": name, "level_m": level})
        (out / "torque_manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
        save_dataset(speed_dataset(params, seed=cfg.seed), out / "speed.csv", "speed")
        save_dataset(time_dataset(params, seed=cfg.seed), out / "time.csv", "time")
        _emit({"out": str(out), "ratios": list(ratios), "torque_points": len(ratios) * args.pushes})
    return run


def cmd_stir(args, cfg, params):
    _ratio(args.ratio)
    level = _length(args.level, cfg, "level", hi=BOWLS[args.bowl].interior_height)

    def run():
        truth = sim.BatterTruth(args.ratio, level, bowl=BOWLS[args.bowl])
        res = stir_until_uniform(truth, params, rng_seed=cfg.seed, threshold_frac=cfg.threshold_frac)
        expected = sim.ground_truth_stop_trial(sim.run_preliminary_stir(truth), params,
                                               cfg.threshold_frac)
        _emit({"stop_trial": res.stop_trial, "ground_truth_trial": expected,
               "trial_torques_nm": [float(t) for t in res.monitor.trial_torques],
               "threshold_nm": float(res.monitor.threshold)})
    return run


def cmd_estimate(args, cfg, params):
    if bool(args.curve) == bool(args.live):
        raise ConfigError("give exactly one of --curve or --live")
    if args.live:
        if args.ratio is None or args.level is None:
            raise ConfigError("--live needs --ratio and --level")
        _ratio(args.ratio)
        level = _length(args.level, cfg, "level", hi=BOWLS[args.bowl].interior_height)
        curve = None
    else:
        curve = _load(TorqueCurve.from_csv, args.curve, "torque curve")

    def run():
        model = _ratio_model(args, cfg, params)
        if curve is None:
            truth = sim.BatterTruth(args.ratio, level, bowl=BOWLS[args.bowl])
            stirred = stir_until_uniform(truth, params, rng_seed=cfg.seed,
                                         threshold_frac=cfg.threshold_frac).truth
            p = perceive(stirred, params, model, rng_seed=cfg.seed + 1, jump_threshold=_jump(cfg, params))
            lvl, ratio = p.level, p.ratio
        else:
            lvl = estimate_level(curve, _jump(cfg, params))
            ratio = estimate_ratio(curve, lvl.level, model)
        _emit({"level": format_length(lvl.level, cfg.units), "level_m": lvl.level, "ratio": ratio})
    return run


def cmd_train(args, cfg, params):
    out = Path(args.out or cfg.model_dir)
    if args.epochs is not None and args.epochs <= 0:
        raise ConfigError("--epochs must be positive")
    if args.lr is not None and not args.lr > 0:
        raise ConfigError("--lr must be positive")
    if args.task == "ratio":
        manifest_path = Path(args.data)
        if manifest_path.is_dir():
            manifest_path = manifest_path / "torque_manifest.json"
        manifest = _load(lambda p: json.loads(Path(p).read_text()), manifest_path, "torque manifest")
        try:
            training = [(float(m["ratio"]), TorqueCurve.from_csv(manifest_path.parent / m["curve"]),
                         float(m["level_m"])) for m in manifest]
        except (KeyError, TypeError, ValueError, OSError) as exc:
            raise ConfigError(f"bad torque manifest: {exc}") from None

        def run():
            model = fit_ratio_model(training, cfg.weighting_mode)
            out.mkdir(parents=True, exist_ok=True)
            model.save(out / "ratio_model.json")
            _emit({"model": str(out / "ratio_model.json"), "labels": list(model.labels),
                   "monotone": model.is_monotone()})
        return run

    rows = _load(lambda p: load_dataset(p, args.task), args.data, f"{args.task} dataset")
    kw = {"seed": cfg.seed}
    if args.epochs is not None:
        kw["epochs"] = args.epochs
    if args.lr is not None:
        kw["learning_rate"] = args.lr
    config = TrainConfig(**kw)

    def run():
        model, history = train_control_model(rows, args.task, config)
        out.mkdir(parents=True, exist_ok=True)
        model.save(out / f"{args.task}_model.json")
        lines = ["epoch,loss"] + [f"{i},{v!r}" for i, v in enumerate(history.tolist())]
        (out / f"{args.task}_loss.csv").write_text("\n".join(lines) + "\n")
        _emit({"model": str(out / f"{args.task}_model.json"), "initial_loss": float(history[0]),
               "final_loss": float(history[-1])})
    return run


def cmd_plan(args, cfg, params):
    scale = _length(args.scale, cfg, "scale", hi=0.1)
    width = _length(args.stroke_width, cfg, "stroke width", hi=0.2)
    mask = _load(lambda p: load_pgm(p, scale), args.image, "image")

    def run():
        traj = plan_trajectory(mask, width, args.mode)
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        traj.save(args.out)
        if args.svg:
            Path(args.svg).write_text(traj.to_svg())
        _emit({"trajectory": args.out, "strokes": len(traj),
               "closed": sum(s.closed for s in traj.strokes)})
    return run


def cmd_pour(args, cfg, params):
    if bool(args.traj) == bool(args.image):
        raise ConfigError("give exactly one of --traj or --image")
    _ratio(args.ratio)
    level = _length(args.level, cfg, "level", hi=0.075)
    scale = _length(args.scale, cfg, "scale", hi=0.1)
    width = _length(args.stroke_width, cfg, "stroke width", hi=0.2)
    mask = traj = None
    if args.image:
        mask = _load(lambda p: load_pgm(p, scale), args.image, "image")
    else:
        traj = _load(Trajectory.load, args.traj, "trajectory")

    def run():
        nonlocal mask, traj
        speed_model = _speed_model(args, cfg, params)
        if traj is None:
            traj = plan_trajectory(mask, width, args.mode)
        target = mask
        if target is None:
            # blank canvas just large enough for the trajectory
            hi = np.vstack([s.points for s in traj.strokes]).max(axis=0) + traj.stroke_width
            shape = (int(np.ceil(hi[1] / scale)) + 2, int(np.ceil(hi[0] / scale)) + 2)
            target = BinaryMask(np.zeros(shape, bool), scale)
        grid, plan, score = simulate_pour(target, traj, args.ratio, level, speed_model, params)
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_pgm(args.out, grid.to_pgm_gray())
        summary = {"deposit": args.out, "strokes": len(traj), "duration_s": plan.duration,
                   "initial_angle_rad": plan.initial_angle, "volume_m3": grid.volume,
                   "speed_mps": plan.strokes[0][1]}
        if mask is not None:
            summary["iou"] = score
        if args.plan_out:
            Path(args.plan_out).write_text(json.dumps(plan.to_dict(), indent=1) + "\n")
        _emit(summary)
    return run


def cmd_eval(args, cfg, params):
    out = Path(args.out or cfg.output_dir)

    def run():
        ratio_model = train_ratio_model(params, seed=cfg.seed).with_mode(cfg.weighting_mode)
        if args.experiment == "perception":
            report = run_perception_experiment(ratio_model, args.n_small, args.n_large, cfg.seed, params)
        elif args.experiment == "lines":
            model = train_control_model(speed_dataset(params, seed=cfg.seed), "speed",
                                        TrainConfig(seed=cfg.seed))[0]
            report = run_line_experiment(model, seed=cfg.seed, params=params, ratio_model=ratio_model)
        else:
            model = train_control_model(time_dataset(params, seed=cfg.seed), "time",
                                        TrainConfig(seed=cfg.seed))[0]
            report = run_round_experiment(model, seed=cfg.seed, params=params, ratio_model=ratio_model)
        csv_path, json_path = report.write(out)
        _emit({"csv": str(csv_path), "json": str(json_path), "aggregates": report.aggregates()})
    return run


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file with [surrogate], [run] and [paths] sections")
    common.add_argument("--seed", type=int, help="master seed (default 0, or [run] seed)")

    p = argparse.ArgumentParser(prog="batterbot",
                                description="Simulated batter perception, planning and pouring.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("gen-data", parents=[common], help="generate torque and control training data")
    g.add_argument("--ratios", default="1.0:1.5:0.05", help="lo:hi:step or comma list (default 1.0:1.5:0.05)")
    g.add_argument("--pushes", type=int, default=60, help="pushes per batch (default 60)")
    g.add_argument("--out", help="output directory (default [paths] dataset_dir)")
    g.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("stir", parents=[common], help="stir a simulated batter until uniform")
    s.add_argument("--ratio", type=float, required=True, help="water-flour ratio")
    s.add_argument("--level", required=True, help="batter level, e.g. 30mm")
    s.add_argument("--bowl", choices=sorted(BOWLS), default="small")
    s.set_defaults(func=cmd_stir)

    e = sub.add_parser("estimate", parents=[common], help="estimate level and ratio")
    e.add_argument("--curve", help="torque curve CSV (tip_height_m,torque_nm)")
    e.add_argument("--live", action="store_true", help="stir and probe a simulated batter")
    e.add_argument("--ratio", type=float, help="true ratio for --live")
    e.add_argument("--level", help="true level for --live, e.g. 30mm")
    e.add_argument("--bowl", choices=sorted(BOWLS), default="small")
    e.add_argument("--model", help="ratio model JSON (default: trained on the fly)")
    e.set_defaults(func=cmd_estimate)

    t = sub.add_parser("train", parents=[common], help="train a speed, time or ratio model")
    t.add_argument("--task", choices=("speed", "time", "ratio"), required=True)
    t.add_argument("--data", required=True, help="CSV for speed/time; gen-data directory for ratio")
    t.add_argument("--out", help="output directory (default [paths] model_dir)")
    t.add_argument("--epochs", type=int, help="override epochs (default 1000)")
    t.add_argument("--lr", type=float, help="override learning rate (default 0.06)")
    t.set_defaults(func=cmd_train)

    pl = sub.add_parser("plan", parents=[common], help="plan a pour trajectory from a PGM image")
    pl.add_argument("--image", required=True, help="binary PGM image")
    pl.add_argument("--stroke-width", default="10mm", help="stroke width (default 10mm)")
    pl.add_argument("--scale", default="1mm", help="size of one pixel (default 1mm)")
    pl.add_argument("--mode", choices=("auto", "enclosed", "open"), default="auto")
    pl.add_argument("--out", default="traj.json", help="trajectory JSON (default traj.json)")
    pl.add_argument("--svg", help="also write an SVG preview")
    pl.set_defaults(func=cmd_plan)

    po = sub.add_parser("pour", parents=[common], help="simulate pouring a trajectory or image")
    po.add_argument("--traj", help="trajectory JSON from 'plan'")
    po.add_argument("--image", help="binary PGM image to plan and pour")
    po.add_argument("--ratio", type=float, required=True, help="water-flour ratio")
    po.add_argument("--level", default="30mm", help="batter level (default 30mm)")
    po.add_argument("--stroke-width", default="10mm", help="stroke width for --image (default 10mm)")
    po.add_argument("--scale", default="1mm", help="pixel size for --image and the griddle (default 1mm)")
    po.add_argument("--mode", choices=("auto", "enclosed", "open"), default="auto")
    po.add_argument("--speed-model", help="speed model JSON (default: trained on the fly)")
    po.add_argument("--out", default="deposit.pgm", help="deposit image (default deposit.pgm)")
    po.add_argument("--plan-out", help="also write the timed pour plan as JSON")
    po.set_defaults(func=cmd_pour)

    ev = sub.add_parser("eval", parents=[common], help="run a simulated experiment")
    ev.add_argument("--experiment", choices=("lines", "round", "perception"), required=True)
    ev.add_argument("--out", help="report directory (default [paths] output_dir)")
    ev.add_argument("--n-small", type=int, default=10, help="perception runs in the small bowl")
    ev.add_argument("--n-large", type=int, default=5, help="perception runs in the large bowl")
    ev.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig()
        if args.config:
            cfg = RunConfig.parse(_load(lambda p: Path(p).read_text(), args.config, "config"))
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
        params = cfg.params()
        run = args.func(args, cfg, params)
    except (ConfigError, PGMParseError) as exc:
        print(f"batterbot {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            run()
    except (PerceptionError, PlanningError, sim.SimulationError, ModelFormatError,
            RuntimeError, ValueError, OSError) as exc:
        print(f"batterbot {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
