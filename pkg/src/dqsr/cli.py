"""Command-line front end: ``dqsr {trajectory,ensemble,sweep,field-pdf}``.

A run is configured by one flat JSON document (``--config``); ``--seed``,
``--out`` and ``--svg`` override the corresponding file values. Exit codes are
0 on success, 2 for configuration errors and 3 for numerical blowups.
"""

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .ensemble import run_ensemble, sweep
from .field import FieldSpec, SeedSpec, field_pdf_histogram
from .generators import ModelKind, ModelSpec, StochasticDraw
from .integrate import IntegratorConfig, NumericalBlowupError, run_trajectory
from .state import InvalidStateError, validate_weights

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass
class RunConfig:
    model: str = "two_state"
    n_states: int = 2
    initial: object = "uniform"
    rate: float = 1.0
    eta: float = 0.1
    dt: float = 0.01
    scheme: str = "euler"
    threshold: float = 1.0 - 1e-4
    max_steps: int = 10**7
    normalize_each_step: bool = True
    form: str | None = None
    theta_cap: float = 0.1
    record_every: int = 1
    n_trajectories: int = 1000
    seed: int = 0
    stream_index: int = 0
    draws: list | None = None
    stratified: bool = False
    sweep_axis: str | None = None
    sweep_values: list | None = None
    sweep_dts: list | None = None
    field_eta: object = 0.5
    field_gamma: int = 16
    field_grid_points: int = 64
    field_x: float = 0.25
    bins: int = 50
    samples: int = 50000
    out: str = "."
    svg: bool = False

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config", "must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        return cls(**data)

    def to_dict(self):
        return dataclasses.asdict(self)

    # -- validation: build every downstream object once, up front

    def initial_weights(self):
        if isinstance(self.initial, str):
            if self.initial != "uniform":
                raise ConfigError("initial", f"unknown preset {self.initial!r} (only 'uniform')")
            return np.full(self.n_states, 1.0 / self.n_states)
        try:
            w = validate_weights(self.initial)
        except (InvalidStateError, TypeError, ValueError) as exc:
            raise ConfigError("initial", str(exc)) from None
        if w.size != self.n_states:
            raise ConfigError("initial", f"has {w.size} entries but n_states = {self.n_states}")
        return w

    def model_spec(self):
        try:
            kind = ModelKind(self.model)
        except ValueError:
            names = ", ".join(k.value for k in ModelKind)
            raise ConfigError("model", f"unknown model {self.model!r}; choose one of {names}") from None
        _check_int("n_states", self.n_states)
        _check_number("rate", self.rate)
        _check_number("eta", self.eta)
        try:
            return ModelSpec(kind, int(self.n_states), float(self.rate), float(self.eta))
        except ValueError as exc:
            name = "rate" if "rate" in str(exc) else "eta" if "eta" in str(exc) else "n_states"
            raise ConfigError(name, str(exc)) from None

    def integrator(self):
        _check_number("dt", self.dt)
        _check_number("threshold", self.threshold)
        _check_int("max_steps", self.max_steps)
        _check_int("record_every", self.record_every)
        if not isinstance(self.normalize_each_step, bool):
            raise ConfigError("normalize_each_step", "must be true or false")
        for name, choices in (("scheme", ("euler", "rk4")), ("form", (None, "angle", "amplitude"))):
            if getattr(self, name) not in choices:
                raise ConfigError(name, f"must be one of {choices}")
        try:
            cfg = IntegratorConfig(
                dt=float(self.dt),
                scheme=self.scheme,
                max_steps=int(self.max_steps),
                outcome_threshold=float(self.threshold),
                normalize_each_step=self.normalize_each_step,
                form=self.form,
                theta_cap=float(self.theta_cap),
                record_every=int(self.record_every),
            )
        except ValueError as exc:
            msg = str(exc)
            name = next((k for k in ("dt", "max_steps", "theta_cap", "record_every") if msg.startswith(k)), "threshold")
            raise ConfigError(name, msg) from None
        try:
            cfg.form_for(self.model_spec())
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("form", str(exc)) from None
        return cfg

    def seed_spec(self):
        _check_int("seed", self.seed)
        _check_int("stream_index", self.stream_index)
        try:
            return SeedSpec(int(self.seed), int(self.stream_index))
        except ValueError as exc:
            name = "seed" if "master" in str(exc) else "stream_index"
            raise ConfigError(name, str(exc)) from None

    def forced_draws(self, model):
        if self.draws is None:
            return None
        try:
            d = StochasticDraw(np.asarray(self.draws, dtype=float), model.draw_convention)
        except (TypeError, ValueError) as exc:
            raise ConfigError("draws", str(exc)) from None
        if d.values.shape != (model.n_draws,):
            raise ConfigError("draws", f"{model.kind.value} model needs {model.n_draws} values")
        return d

    def field_etas(self):
        etas = self.field_eta if isinstance(self.field_eta, list) else [self.field_eta]
        if not etas:
            raise ConfigError("field_eta", "needs at least one value")
        for v in etas:
            _check_number("field_eta", v)
        return [float(v) for v in etas]

    def field_specs(self):
        _check_int("field_gamma", self.field_gamma)
        _check_int("field_grid_points", self.field_grid_points)
        specs = []
        for eta in self.field_etas():
            try:
                specs.append(FieldSpec(eta, int(self.field_gamma), int(self.field_grid_points)))
            except ValueError as exc:
                msg = str(exc)
                name = "field_eta" if "eta" in msg else "field_gamma" if "gamma" in msg else "field_grid_points"
                raise ConfigError(name, msg) from None
        _check_number("field_x", self.field_x)
        if not 0 <= self.field_x < 1:
            raise ConfigError("field_x", "must lie in [0, 1)")
        _check_int("bins", self.bins)
        if self.bins < 2:
            raise ConfigError("bins", "must be >= 2")
        _check_int("samples", self.samples)
        if self.samples < 1:
            raise ConfigError("samples", "must be >= 1")
        return specs

    def ensemble_size(self):
        _check_int("n_trajectories", self.n_trajectories)
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories", "must be >= 1")
        if not isinstance(self.stratified, bool):
            raise ConfigError("stratified", "must be true or false")
        if self.stratified and self.model != ModelKind.SINGLE_LAMBDA.value:
            raise ConfigError("stratified", "only the single_lambda model supports stratified draws")
        return int(self.n_trajectories)

    def sweep_plan(self):
        if self.sweep_axis not in ("dt", "eta"):
            raise ConfigError("sweep_axis", "must be 'dt' or 'eta'")
        values = self.sweep_values
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep_values", "must be a non-empty list")
        for v in values:
            _check_number("sweep_values", v)
        diffs = np.diff(np.asarray(values, dtype=float))
        if len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ConfigError("sweep_values", "must be strictly monotone")
        if self.sweep_axis == "dt" and any(v <= 0 for v in values):
            raise ConfigError("sweep_values", "dt values must be positive")
        if self.sweep_axis == "eta" and any(not 0 < v <= 1 for v in values):
            raise ConfigError("sweep_values", "eta values must lie in (0, 1]")
        dts = self.sweep_dts
        if dts is not None:
            if self.sweep_axis != "eta":
                raise ConfigError("sweep_dts", "only valid with sweep_axis 'eta'")
            if not isinstance(dts, list) or len(dts) != len(values):
                raise ConfigError("sweep_dts", "needs one dt per sweep value")
            for v in dts:
                _check_number("sweep_dts", v)
                if v <= 0:
                    raise ConfigError("sweep_dts", "dt values must be positive")
        return self.sweep_axis, [float(v) for v in values], dts


def _check_number(name, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError(name, f"must be a finite number, got {v!r}")


def _check_int(name, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(name, f"must be an integer, got {v!r}")


# ---------------------------------------------------------------------------
# commands


def cmd_trajectory(rc):
    model = rc.model_spec()
    cfg = rc.integrator()
    w0 = rc.initial_weights()
    seed = rc.seed_spec()
    draws = rc.forced_draws(model)
    out = _outdir(rc)
    rec = run_trajectory(w0, model, cfg, seed=seed, draws=draws)
    conf = rc.to_dict()
    header = ["t"] + [f"w_{j}" for j in range(model.n_states)]
    rows = np.column_stack([rec.times, rec.weights])
    io.write_csv(out / "trajectory.csv", header, rows, conf)
    if rc.svg:
        series = [(f"w_{j}", rec.times, rec.weights[:, j]) for j in range(model.n_states)]
        io.write_svg(out / "trajectory.svg", series, conf, title=f"{model.kind.value} trajectory",
                     xlabel="t", ylabel="weight")
    outcome = "unresolved" if rec.outcome is None else rec.outcome
    print(f"outcome {outcome} after {rec.steps_taken} steps")


def _ensemble_payload(report, rc):
    payload = report.to_dict()
    payload["config"] = rc.to_dict()
    return payload


def _write_deviation(path, report, conf):
    times, devs = report.deviation_series
    io.write_csv(path, ["t", "deviation"], np.column_stack([times, devs]), conf)


def cmd_ensemble(rc):
    model = rc.model_spec()
    cfg = rc.integrator()
    w0 = rc.initial_weights()
    seed = rc.seed_spec()
    n = rc.ensemble_size()
    out = _outdir(rc)
    rep = run_ensemble(w0, model, cfg, n, seed.master_seed, seed.stream_index, rc.stratified)
    conf = rc.to_dict()
    io.write_json(out / "ensemble.json", _ensemble_payload(rep, rc))
    _write_deviation(out / "deviation.csv", rep, conf)
    if rc.svg:
        times, devs = rep.deviation_series
        io.write_svg(out / "deviation.svg", [(model.kind.value, times, devs)], conf, logx=True,
                     title="deviation from Born weights", xlabel="t", ylabel="L1 deviation")
    print(f"counts {list(map(int, rep.outcome_counts))} unresolved {rep.unresolved_count} "
          f"deviation {rep.final_deviation:.6g} +- {rep.stderr:.2g}")


def cmd_sweep(rc):
    model = rc.model_spec()
    cfg = rc.integrator()
    w0 = rc.initial_weights()
    seed = rc.seed_spec()
    n = rc.ensemble_size()
    axis, values, dts = rc.sweep_plan()
    if seed.stream_index:
        raise ConfigError("stream_index", "sweeps always start at stream 0")
    out = _outdir(rc)
    table = sweep(w0, model, cfg, axis, values, n, seed.master_seed, dts=dts, stratified=rc.stratified)
    conf = rc.to_dict()
    io.write_csv(out / "sweep.csv", ["param", "deviation", "stderr"], table.points, conf)
    series = []
    for i, (v, rep) in enumerate(zip(values, table.reports)):
        _write_deviation(out / f"deviation_{i}.csv", rep, dict(conf, sweep_point=i, sweep_value=v))
        times, devs = rep.deviation_series
        series.append((f"{axis} = {v:g}", times, devs))
    if rc.svg:
        io.write_svg(out / "sweep.svg", series, conf, logx=True, title=f"deviation vs time across {axis}",
                     xlabel="t", ylabel="L1 deviation")
    for v, d, se in table.points:
        print(f"{axis} {v:g}: deviation {d:.6g} +- {se:.2g}")


def cmd_field_pdf(rc):
    specs = rc.field_specs()
    seed = rc.seed_spec()
    out = _outdir(rc)
    conf = rc.to_dict()
    series = []
    for spec in specs:
        hist = field_pdf_histogram(spec, rc.field_x, int(rc.samples), int(rc.bins), seed)
        name = "field_pdf.csv" if len(specs) == 1 else f"field_pdf_eta{spec.eta:g}.csv"
        io.write_csv(out / name, ["bin_center", "density"], np.column_stack([hist.centers, hist.density]),
                     dict(conf, field_eta=spec.eta))
        series.append((f"eta = {spec.eta:g}", hist.centers, hist.density))
    if rc.svg:
        io.write_svg(out / "field_pdf.svg", series, conf, title="distribution of the random field",
                     xlabel="Lambda(x)", ylabel="density")


def _outdir(rc):
    out = Path(rc.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("out", str(exc)) from None
    return out


COMMANDS = {
    "trajectory": cmd_trajectory,
    "ensemble": cmd_ensemble,
    "sweep": cmd_sweep,
    "field-pdf": cmd_field_pdf,
}


def load_config(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="dqsr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the file)")
        p.add_argument("--out", help="output directory (overrides the file)")
        p.add_argument("--svg", action="store_true", default=None, help="also write SVG plots")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        data = load_config(args.config)
        rc = RunConfig.from_dict(data)
        for key in ("seed", "out", "svg"):
            if getattr(args, key) is not None:
                setattr(rc, key, getattr(args, key))
        COMMANDS[args.command](rc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBlowupError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
