"""Command line pipeline driver.

Subcommands cover the whole workflow: ``generate`` writes datasets,
``train`` fits the diffusion surrogate and/or the mode classifier,
``calibrate`` builds per-mode conformal thresholds, ``monitor`` prints
prediction intervals for one initial state, ``evaluate`` produces the full
report and ``report`` re-prints a stored one.

Configuration comes from defaults, then a preset, then an optional TOML
config file, then command line flags, in that order.  The fully resolved
config is echoed as TOML next to every output, and feeding that echo back
via ``--config`` reproduces the run.  Artifact file names carry a short
hash of the config fields that determined them, so runs with different
settings never overwrite each other and a stage refuses artifacts built
under different settings instead of silently mixing them.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .conformal import (
    CalibratedMonitor,
    SampleCache,
    build_monitor,
    cpi_json_line,
    load_calibration,
    monitor_state,
    save_calibration,
)
from .evaluation import EvalReport, bootstrap_evaluate, emit_report, load_report
from .modes import ClassifierHyper, ExactModePredictor, load_classifier, save_classifier, train_classifier
from .scenarios import SCENARIOS, Dataset, SplitSizes, generate_dataset, get_scenario, load_dataset, save_dataset
from .stl import HorizonError, StlError, parse_formula, to_text
from .surrogate import (
    NotFittedError,
    ResamplePool,
    TrainHyper,
    TrainingDivergedError,
    load_diffusion_model,
    new_diffusion_model,
    save_diffusion_model,
    train_denoiser,
)

__all__ = ["ConfigError", "RunConfig", "build_config", "main"]


class ConfigError(ValueError):
    """Bad or inconsistent configuration; the message names the field."""


# ---------------------------------------------------------------- config

_PRESETS = {
    # small enough for an interactive run on one core
    "desk": dict(
        train=1000,
        cal_states=200,
        cal_per_state=100,
        test_states=100,
        test_per_state=100,
        epochs=300,
        batch_size=256,
        lr=1e-3,
        rounds=1,
        cal_draw=0,
        with_replacement=False,
    ),
    # the full experimental protocol
    "paper": dict(
        train=3000,
        cal_states=600,
        cal_per_state=300,
        test_states=200,
        test_per_state=300,
        epochs=200,
        batch_size=512,
        lr=5e-4,
        rounds=10,
        cal_draw=500,
        with_replacement=True,
    ),
}


@dataclass
class RunConfig:
    """Every knob for one pipeline run.

    Defaults give a Signal run at desk scale with the resampling surrogate
    and the exact mode predictor, which finishes in well under a minute.
    ``cal_draw = 0`` means "the full calibration pool"; ``threads`` is
    validated but reserved (all stages are single-process NumPy).
    """

    preset: str = "desk"
    scenario: str = "Signal"
    prop: str = ""  # property id or inline formula text; "" = scenario default
    alpha: float = 0.1
    k_samples: int = 100
    surrogate: str = "resample"  # resample | diffusion
    predictor: str = "exact"  # exact | learned
    train: int = 1000
    cal_states: int = 200
    cal_per_state: int = 100
    test_states: int = 100
    test_per_state: int = 100
    data_seed: int = 0
    train_seed: int = 1
    cal_seed: int = 2
    test_seed: int = 3
    epochs: int = 300
    batch_size: int = 256
    lr: float = 1e-3
    classifier_epochs: int = 400
    classifier_lr: float = 0.02
    k_nn: int = 50
    rounds: int = 1
    cal_draw: int = 0
    with_replacement: bool = False
    threads: int = 1
    data_dir: str = ""
    checkpoint_dir: str = ""
    report_dir: str = ""


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    want = _FIELD_TYPES[key]
    if want == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean, got {value!r}")
        return value
    if want == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if want == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def _load_config_file(path) -> dict:
    try:
        doc = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config file {path}: {e}")
    for key in doc:
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r} in {path}")
    return doc


def _positive(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1, got {getattr(cfg, name)}")


def _validate(cfg: RunConfig) -> None:
    if cfg.preset not in _PRESETS:
        raise ConfigError(f"preset must be one of {', '.join(sorted(_PRESETS))}, got {cfg.preset!r}")
    by_lower = {k.lower(): k for k in SCENARIOS}
    if cfg.scenario.lower() not in by_lower:
        known = ", ".join(sorted(SCENARIOS))
        raise ConfigError(f"scenario must be one of {known}, got {cfg.scenario!r}")
    cfg.scenario = by_lower[cfg.scenario.lower()]
    if not 0.0 < cfg.alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {cfg.alpha}")
    if cfg.surrogate not in ("resample", "diffusion"):
        raise ConfigError(f"surrogate must be 'resample' or 'diffusion', got {cfg.surrogate!r}")
    if cfg.predictor not in ("exact", "learned"):
        raise ConfigError(f"predictor must be 'exact' or 'learned', got {cfg.predictor!r}")
    _positive(
        cfg,
        "k_samples",
        "train",
        "cal_states",
        "cal_per_state",
        "test_states",
        "test_per_state",
        "batch_size",
        "k_nn",
        "rounds",
        "threads",
    )
    if cfg.epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {cfg.epochs}")
    if cfg.classifier_epochs < 0:
        raise ConfigError(f"classifier_epochs must be >= 0, got {cfg.classifier_epochs}")
    if cfg.lr <= 0:
        raise ConfigError(f"lr must be > 0, got {cfg.lr}")
    if cfg.classifier_lr <= 0:
        raise ConfigError(f"classifier_lr must be > 0, got {cfg.classifier_lr}")
    if cfg.cal_draw < 0:
        raise ConfigError(f"cal_draw must be >= 0 (0 = full pool), got {cfg.cal_draw}")
    if not cfg.with_replacement and cfg.cal_draw > cfg.cal_states:
        raise ConfigError(
            f"cal_draw must be <= cal_states ({cfg.cal_states}) without replacement, got {cfg.cal_draw}"
        )


def build_config(args: argparse.Namespace) -> RunConfig:
    """defaults < preset < config file < flags, then validation."""
    file_doc = _load_config_file(args.config) if getattr(args, "config", None) else {}
    preset = getattr(args, "preset", None) or file_doc.get("preset") or "desk"
    if preset not in _PRESETS:
        raise ConfigError(f"preset must be one of {', '.join(sorted(_PRESETS))}, got {preset!r}")
    cfg = RunConfig(preset=preset, **_PRESETS[preset])
    for key, value in file_doc.items():
        if key != "preset":
            setattr(cfg, key, _coerce(key, value))
    for key in _FIELD_TYPES:
        if key in ("preset", "prop"):
            continue
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "prop", None):  # repeatable flag; the config keeps the first
        cfg.prop = args.prop[0]
    root = Path(os.environ.get("STLCAST_DATA_ROOT", "runs"))
    cfg.data_dir = cfg.data_dir or str(root / "data")
    cfg.checkpoint_dir = cfg.checkpoint_dir or str(root / "checkpoints")
    cfg.report_dir = cfg.report_dir or str(root / "reports")
    _validate(cfg)
    return cfg


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return json.dumps(value)


def write_effective_config(cfg: RunConfig, path: Path) -> None:
    lines = [f"{name} = {_toml_value(getattr(cfg, name))}" for name in sorted(_FIELD_TYPES)]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- artifact naming


def _stamp(*pairs) -> str:
    text = ";".join(f"{k}={v!r}" for k, v in pairs)
    return hashlib.sha256(text.encode()).hexdigest()[:8]


def _data_stamp(cfg: RunConfig) -> str:
    return _stamp(
        ("scenario", cfg.scenario),
        ("train", cfg.train),
        ("cal_states", cfg.cal_states),
        ("cal_per_state", cfg.cal_per_state),
        ("test_states", cfg.test_states),
        ("test_per_state", cfg.test_per_state),
        ("data_seed", cfg.data_seed),
    )


def dataset_paths(cfg: RunConfig) -> dict[str, Path]:
    stamp = _data_stamp(cfg)
    root = Path(cfg.data_dir)
    return {split: root / f"{cfg.scenario}-{split}-{stamp}.jsonl" for split in ("train", "calibration", "test")}


def _surrogate_stamp(cfg: RunConfig) -> str:
    if cfg.surrogate == "resample":
        return _stamp(("data", _data_stamp(cfg)), ("k_nn", cfg.k_nn))
    return _stamp(
        ("data", _data_stamp(cfg)),
        ("epochs", cfg.epochs),
        ("batch_size", cfg.batch_size),
        ("lr", cfg.lr),
        ("train_seed", cfg.train_seed),
    )


def _classifier_stamp(cfg: RunConfig) -> str:
    return _stamp(
        ("data", _data_stamp(cfg)),
        ("classifier_epochs", cfg.classifier_epochs),
        ("classifier_lr", cfg.classifier_lr),
        ("train_seed", cfg.train_seed),
    )


def checkpoint_path(cfg: RunConfig) -> Path:
    return Path(cfg.checkpoint_dir) / f"{cfg.scenario}-diffusion-{_surrogate_stamp(cfg)}.ckpt"


def classifier_path(cfg: RunConfig) -> Path:
    return Path(cfg.checkpoint_dir) / f"{cfg.scenario}-classifier-{_classifier_stamp(cfg)}.ckpt"


def _cal_stamp(cfg: RunConfig, prop_text: str) -> str:
    pairs = [
        ("surrogate", cfg.surrogate),
        ("s", _surrogate_stamp(cfg)),
        ("predictor", cfg.predictor),
        ("property", prop_text),
        ("alpha", cfg.alpha),
        ("k_samples", cfg.k_samples),
        ("cal_seed", cfg.cal_seed),
    ]
    if cfg.predictor == "learned":
        pairs.append(("c", _classifier_stamp(cfg)))
    return _stamp(*pairs)


def calibration_path(cfg: RunConfig, prop_text: str) -> Path:
    return Path(cfg.checkpoint_dir) / f"{cfg.scenario}-calibration-{_cal_stamp(cfg, prop_text)}.json"


def report_directory(cfg: RunConfig, prop_text: str) -> Path:
    stamp = _stamp(
        ("cal", _cal_stamp(cfg, prop_text)),
        ("rounds", cfg.rounds),
        ("cal_draw", cfg.cal_draw),
        ("with_replacement", cfg.with_replacement),
        ("test_seed", cfg.test_seed),
    )
    return Path(cfg.report_dir) / f"{cfg.scenario}-{stamp}"


# ---------------------------------------------------------------- shared stage plumbing


def _load_split(cfg: RunConfig, split: str) -> Dataset:
    path = dataset_paths(cfg)[split]
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `stlcast generate` with this config first")
    return load_dataset(path, expect_scenario=cfg.scenario)


def _resolve_property(cfg: RunConfig, scenario, prop: str | None = None) -> tuple[str, str]:
    """Returns (label, formula text); the label is the property id or 'inline'."""
    prop = cfg.prop if prop is None else prop
    if not prop:
        prop = scenario.default_property
    if prop in scenario.properties:
        return prop, scenario.properties[prop]
    try:
        parse_formula(prop, scenario.dim)
    except StlError as e:
        known = ", ".join(sorted(scenario.properties))
        raise ConfigError(
            f"property {prop!r} is neither one of {scenario.id}'s ids ({known}) nor a valid formula: {e}"
        )
    return "inline", prop


def _build_surrogate(cfg: RunConfig):
    if cfg.surrogate == "resample":
        train = _load_split(cfg, "train")
        return ResamplePool(train.batch.states, cfg.k_nn, cfg.scenario)
    path = checkpoint_path(cfg)
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `stlcast train` with this config first")
    return load_diffusion_model(path)


def _build_predictor(cfg: RunConfig, scenario):
    if cfg.predictor == "exact":
        return ExactModePredictor(scenario)
    path = classifier_path(cfg)
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `stlcast train` with this config first")
    return load_classifier(path)


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _render_interval(interval, tau: float) -> str:
    if interval.degenerate:
        body = f"({interval.lo:.4f}, {interval.hi:.4f}) [degenerate]"
    else:
        body = f"[{interval.lo:.4f}, {interval.hi:.4f}]"
        if interval.collapsed:
            body += " [collapsed]"
    return f"mode {interval.mode}: {body}  tau={_fmt(tau)}  K={interval.k_used}"


def _render_union(union) -> str:
    parts = []
    for lo, hi in union:
        open_ended = not (np.isfinite(lo) and np.isfinite(hi))
        parts.append(f"({lo:.4f}, {hi:.4f})" if open_ended else f"[{lo:.4f}, {hi:.4f}]")
    return " | ".join(parts) if parts else "(empty)"


# ---------------------------------------------------------------- subcommands


def cmd_generate(cfg: RunConfig, args) -> int:
    scenario = get_scenario(cfg.scenario)
    sizes = SplitSizes(cfg.train, cfg.cal_states, cfg.cal_per_state, cfg.test_states, cfg.test_per_state)
    train, cal, test = generate_dataset(scenario, sizes, cfg.data_seed)
    paths = dataset_paths(cfg)
    Path(cfg.data_dir).mkdir(parents=True, exist_ok=True)
    for split, dataset in (("train", train), ("calibration", cal), ("test", test)):
        save_dataset(dataset, paths[split])
    write_effective_config(cfg, Path(cfg.data_dir) / f"generate-{_data_stamp(cfg)}.toml")
    print(f"scenario {cfg.scenario}  data_seed {cfg.data_seed}")
    print(f"train        {cfg.train} trajectories        -> {paths['train']}")
    print(f"calibration  {cfg.cal_states} states x {cfg.cal_per_state}  -> {paths['calibration']}")
    print(f"test         {cfg.test_states} states x {cfg.test_per_state}  -> {paths['test']}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    scenario = get_scenario(cfg.scenario)
    trained = False
    Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)
    if cfg.surrogate == "diffusion":
        train = _load_split(cfg, "train")
        model = new_diffusion_model(cfg.scenario, scenario.dim, scenario.horizon, cfg.train_seed)
        model, trace = train_denoiser(model, train, TrainHyper(cfg.epochs, cfg.batch_size, cfg.lr), cfg.train_seed)
        path = checkpoint_path(cfg)
        save_diffusion_model(model, path)
        loss = f"{trace[-1]:.6f}" if len(trace) else "n/a (0 epochs)"
        print(f"diffusion surrogate: epochs={cfg.epochs} batch_size={cfg.batch_size} lr={cfg.lr}")
        print(f"  final loss {loss}  -> {path}")
        trained = True
    if cfg.predictor == "learned":
        train = _load_split(cfg, "train")
        hyper = ClassifierHyper(cfg.classifier_epochs, cfg.classifier_lr)
        clf, trace = train_classifier(train, scenario.mode_count, hyper, cfg.train_seed)
        path = classifier_path(cfg)
        save_classifier(clf, path)
        acc = f"{trace[-1]:.4f}" if len(trace) else "n/a (0 epochs)"
        print(f"mode classifier: epochs={cfg.classifier_epochs} lr={cfg.classifier_lr}")
        print(f"  held-out accuracy {acc}  -> {path}")
        trained = True
    if not trained:
        print("nothing to train: the resampling surrogate needs no fitting and the exact mode predictor is analytic")
    write_effective_config(
        cfg,
        Path(cfg.checkpoint_dir) / f"train-{_stamp(('s', _surrogate_stamp(cfg)), ('c', _classifier_stamp(cfg)))}.toml",
    )
    return 0


def cmd_calibrate(cfg: RunConfig, args) -> int:
    scenario = get_scenario(cfg.scenario)
    label, text = _resolve_property(cfg, scenario)
    phi = parse_formula(text, scenario.dim)
    cal = _load_split(cfg, "calibration")
    surrogate = _build_surrogate(cfg)
    predictor = _build_predictor(cfg, scenario)
    monitor = build_monitor(surrogate, predictor, cal, phi, cfg.alpha, cfg.k_samples, cfg.cal_seed)
    path = calibration_path(cfg, text)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_calibration(monitor, path)
    print(f"calibrated {cfg.scenario} property {label}: {to_text(phi)}  alpha={cfg.alpha} K={cfg.k_samples}")
    for rec in monitor.records:
        print(f"  mode {rec.mode}: n={rec.n}  tau={_fmt(rec.tau)}")
    print(f"-> {path}")
    write_effective_config(cfg, path.with_suffix(".toml"))
    return 0


def _monitor_properties(cfg: RunConfig, scenario, args) -> list[tuple[str, str]]:
    raw = args.prop if getattr(args, "prop", None) else [cfg.prop]
    resolved = [_resolve_property(cfg, scenario, p) for p in raw]
    seen: set[str] = set()
    return [lt for lt in resolved if not (lt[1] in seen or seen.add(lt[1]))]


def cmd_monitor(cfg: RunConfig, args) -> int:
    scenario = get_scenario(cfg.scenario)
    s0 = _parse_s0(args.s0, scenario.dim)
    props = _monitor_properties(cfg, scenario, args)
    surrogate = _build_surrogate(cfg)
    predictor = _build_predictor(cfg, scenario)
    cache = SampleCache()

    monitors: dict[str, CalibratedMonitor] = {}
    if args.calibrate:
        cal = _load_split(cfg, "calibration")
        for _, text in props:
            phi = parse_formula(text, scenario.dim)
            monitors[text] = build_monitor(
                surrogate, predictor, cal, phi, cfg.alpha, cfg.k_samples, cfg.cal_seed, cache
            )
    else:
        for _, text in props:
            path = calibration_path(cfg, text)
            if not path.exists():
                raise FileNotFoundError(
                    f"{path} not found; run `stlcast calibrate` with this config first, or pass --calibrate"
                )
            meta, records = load_calibration(path)
            if meta["surrogate"] != surrogate.fingerprint():
                raise ConfigError(
                    f"calibration {path.name} was built against surrogate {meta['surrogate']}, "
                    f"but this config yields {surrogate.fingerprint()}; re-run `stlcast calibrate`"
                )
            monitors[text] = CalibratedMonitor(
                parse_formula(meta["property"], scenario.dim),
                surrogate,
                predictor,
                tuple(records),
                meta["alpha"],
                meta["k_samples"],
                meta["cal_seed"],
            )

    out_dir = Path(cfg.report_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for label, text in props:
        monitor = monitors[text]
        result = monitor_state(monitor, s0, cfg.test_seed, cache)
        print(f"property {label}: {to_text(monitor.phi)}")
        lines = []
        for interval, rec in zip(result.intervals, monitor.records):
            print("  " + _render_interval(interval, rec.tau))
            lines.append(cpi_json_line(s0, interval, rec.tau))
        print(f"  union: {_render_union(result.union)}")
        jsonl = out_dir / f"monitor-{_stamp(('cal', _cal_stamp(cfg, text)), ('s0', args.s0), ('seed', cfg.test_seed))}.jsonl"
        jsonl.write_text("\n".join(lines) + "\n")
        print(f"  -> {jsonl}")
    write_effective_config(cfg, out_dir / f"monitor-{_stamp(('s0', args.s0), ('cfg', _cal_stamp(cfg, props[0][1])))}.toml")
    return 0


def _parse_s0(text: str, dim: int) -> np.ndarray:
    try:
        values = [float(tok) for tok in text.split(",")]
    except ValueError:
        raise ConfigError(f"s0 must be comma separated floats, got {text!r}")
    if len(values) != dim:
        raise ConfigError(f"s0 needs {dim} components for this scenario, got {len(values)}")
    return np.asarray(values, dtype=np.float64)


def cmd_evaluate(cfg: RunConfig, args) -> int:
    scenario = get_scenario(cfg.scenario)
    label, text = _resolve_property(cfg, scenario)
    phi = parse_formula(text, scenario.dim)
    cal = _load_split(cfg, "calibration")
    test = _load_split(cfg, "test")
    surrogate = _build_surrogate(cfg)
    predictor = _build_predictor(cfg, scenario)
    report = bootstrap_evaluate(
        surrogate,
        predictor,
        phi,
        cal,
        test,
        cfg.alpha,
        cfg.k_samples,
        rounds=cfg.rounds,
        cal_draw=None if cfg.cal_draw == 0 else cfg.cal_draw,
        with_replacement=cfg.with_replacement,
        seed=cfg.cal_seed,
    )
    out = report_directory(cfg, text)
    out.mkdir(parents=True, exist_ok=True)
    paths = emit_report(report, out)
    write_effective_config(cfg, out / "config.toml")
    _print_summary(report)
    print(f"report -> {paths['report']}")
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    if args.path:
        path = Path(args.path)
    else:
        scenario = get_scenario(cfg.scenario)
        _, text = _resolve_property(cfg, scenario)
        path = report_directory(cfg, text)
    if path.is_dir():
        path = path / "report.json"
    _print_summary(load_report(path))
    return 0


def _cov(c) -> str:
    return "n/a" if c is None else f"{c:.4f}"


def _width(w) -> str:
    return "inf" if w is None or not np.isfinite(w) else f"{w:.4f}"


def _print_summary(report: EvalReport) -> None:
    print(f"scenario {report.scenario_id}  property {report.property_text}")
    print(
        f"surrogate {report.surrogate_id}  predictor {report.predictor_kind}  "
        f"alpha={report.alpha} K={report.k_samples}"
    )
    print(
        f"calibration {report.cal_states} states  test {report.test_states} states  "
        f"rounds {report.rounds}"
    )
    print()
    gain = ""
    if report.efficiency is not None and report.baseline_width is not None and np.isfinite(report.baseline_width):
        gain = f"  ({100.0 * (1.0 - report.efficiency / report.baseline_width):.1f}% narrower)"
    print(f"{'':24}{'width':>10}{'coverage':>10}")
    print(f"{'EQR (data quantiles)':24}{report.eqr:>10.4f}{'--':>10}")
    print(f"{'mode-agnostic baseline':24}{_width(report.baseline_width):>10}{report.baseline_coverage:>10.4f}")
    print(f"{'mode-conditional':24}{_width(report.efficiency):>10}{report.marginal_coverage:>10.4f}{gain}")
    print()
    print("per-mode coverage: " + "  ".join(f"{g}={_cov(c)}" for g, c in enumerate(report.per_mode_coverage, 1)))
    if report.per_mode_coverage_exact is not None and report.predictor_kind != "ExactModePredictor":
        line = "  ".join(f"{g}={_cov(c)}" for g, c in enumerate(report.per_mode_coverage_exact, 1))
        print("  (under exact labels: " + line + ")")
    print("per-mode tau:      " + "  ".join(f"{g}={_fmt(t)}" for g, t in enumerate(report.per_mode_tau, 1)))
    if report.infinite_union_states:
        print(f"states with an unbounded union: {_fmt(report.infinite_union_states)}")


# ---------------------------------------------------------------- entry point

_DISPATCH = {
    "generate": cmd_generate,
    "train": cmd_train,
    "calibrate": cmd_calibrate,
    "monitor": cmd_monitor,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration", "flags override the config file, which overrides the preset")
    g.add_argument("--config", metavar="FILE", help="TOML config file (flat key = value)")
    g.add_argument("--preset", choices=sorted(_PRESETS))
    g.add_argument("--scenario", help="case-insensitive scenario id")
    g.add_argument(
        "--property",
        dest="prop",
        action="append",
        metavar="PROP",
        help="property id or inline formula; repeatable for monitor",
    )
    g.add_argument("--alpha", type=float)
    g.add_argument("--k-samples", type=int, metavar="K")
    g.add_argument("--surrogate", choices=("resample", "diffusion"))
    g.add_argument("--predictor", choices=("exact", "learned"))
    for name in (
        "train",
        "cal-states",
        "cal-per-state",
        "test-states",
        "test-per-state",
        "data-seed",
        "train-seed",
        "cal-seed",
        "test-seed",
        "epochs",
        "batch-size",
        "classifier-epochs",
        "k-nn",
        "rounds",
        "cal-draw",
        "threads",
    ):
        g.add_argument(f"--{name}", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--classifier-lr", type=float)
    g.add_argument("--with-replacement", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--data-dir")
    g.add_argument("--checkpoint-dir")
    g.add_argument("--report-dir")
    return p


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stlcast", description=__doc__.split("\n\n")[0])
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write train/calibration/test datasets")
    sub.add_parser("train", parents=[common], help="fit the diffusion surrogate and/or mode classifier")
    sub.add_parser("calibrate", parents=[common], help="build per-mode conformal thresholds")
    mp = sub.add_parser("monitor", parents=[common], help="prediction intervals for one initial state")
    mp.add_argument("--s0", required=True, metavar="V0,V1,...", help="initial state, comma separated")
    mp.add_argument("--calibrate", action="store_true", help="calibrate in-process instead of loading a record")
    sub.add_parser("evaluate", parents=[common], help="run the full evaluation and write a report")
    rp = sub.add_parser("report", parents=[common], help="re-print a stored report")
    rp.add_argument("--path", help="report directory or report.json (default: derived from the config)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return _DISPATCH[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NotFittedError as e:
        print(f"surrogate error: {e}; run `stlcast train` with epochs > 0", file=sys.stderr)
        return 2
    except TrainingDivergedError as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return 4
    except HorizonError as e:
        print(f"horizon error: {e}", file=sys.stderr)
        return 5
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
