"""Command-line entry point.

Every subcommand accepts ``--config FILE`` plus one flag per configuration
leaf (``--train.lr_peak 5e-4``); flags win over the file. Artifacts land in
fixed subdirectories of ``--output``:

    trajectories/NNNN/   simulate
    dataset/             curriculum
    models/<kind>/       train
    eval/<tag>/          evaluate
    rollouts/<case>/     rollout
    sweeps/, interpret/  sweep, interpret

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import click
import numpy as np
import yaml

from . import analysis, config as cfgmod
from .config import ConfigError, RunConfig
from .curriculum import Dataset, LazyDataset, build_curriculum, load_dataset as open_dataset
from .errors import MissingInputError, NumericalError
from .models import Emulator, parameter_shapes
from .rollout import rollout as run_rollout
from .sim import GaussianPacketSpec, PotentialSpec, Trajectory, iter_trajectories, simulate_batch
from .training import Checkpoint, train as run_train

log = logging.getLogger("qdemu")

ARCHITECTURES = ("linear", "dense", "conv", "gru")
TARGETS = ("table1", "fig2", "fig3", "fig4", "fig5", "s3", "s4", "s5", "s6", "s7", "s8")

# desk-scale preset: a few hundred configurations and sparser sampling, so the
# chain fits a laptop; the unmodified defaults describe the full-scale run
PRESETS = {
    "full": {},
    "desk": {
        "data.subset": 300,
        "window.spatial_keep_prob": 0.01,
        "train.epochs": 2,
    },
}


# --------------------------------------------------------------------------
# layout
# --------------------------------------------------------------------------


class Layout:
    def __init__(self, root):
        self.root = Path(root)

    @property
    def trajectories(self) -> Path:
        return self.root / "trajectories"

    @property
    def dataset(self) -> Path:
        return self.root / "dataset"

    def model(self, kind: str) -> Path:
        return self.root / "models" / kind

    def eval(self, tag: str) -> Path:
        return self.root / "eval" / tag

    @property
    def truths(self) -> Path:
        return self.root / "suites"


def _require(path: Path, marker: str, producer: str) -> Path:
    if not (path / marker).exists():
        raise MissingInputError(f"missing {path / marker}; produce it with `qdemu {producer}`")
    return path


# --------------------------------------------------------------------------
# pipeline stages (plain functions, reused by `reproduce`)
# --------------------------------------------------------------------------


def plan_cases(cfg: RunConfig) -> list[dict]:
    """Every (packet, potential) of the configured training grid, with stable ids."""
    d = cfg.data
    packets = [GaussianPacketSpec(x0, s0, e0) for x0 in d.x0 for s0 in d.s0 for e0 in d.e0]
    cases = []
    if d.regime in ("free", "both"):
        cases += [(p, PotentialSpec.none()) for p in packets]
    if d.regime in ("barrier", "both"):
        cases += [(p, PotentialSpec.rectangular(h, d.barrier_width)) for p in packets for h in d.barrier_heights]
    ids = np.arange(len(cases))
    if d.subset and d.subset < len(cases):
        ids = np.sort(np.random.default_rng(d.subset_seed).permutation(len(cases))[: d.subset])
    return [{"id": int(i), "packet": asdict(cases[i][0]), "potential": cases[i][1].to_dict()} for i in ids]


def stage_simulate(cfg: RunConfig, dry_run: bool = False, chunk: int = 32, echo=click.echo) -> list[Path]:
    lay = Layout(cfg.output)
    plan = plan_cases(cfg)
    root = lay.trajectories
    dirs = [root / f"{c['id']:04d}" for c in plan]
    todo = [(c, d) for c, d in zip(plan, dirs) if not (d / "manifest.json").exists()]
    echo(f"planned {len(plan)} trajectories: {len(plan) - len(todo)} present, {len(todo)} to simulate")
    if dry_run:
        return dirs
    root.mkdir(parents=True, exist_ok=True)
    plan_doc = {"grid": asdict(cfg.sim), "method": cfg.method, "cases": plan}
    plan_path = root / "plan.json"
    if plan_path.exists() and json.loads(plan_path.read_text()) != json.loads(json.dumps(plan_doc)):
        raise ConfigError(f"{root} holds trajectories from a different plan; choose another --output")
    plan_path.write_text(json.dumps(plan_doc))
    cfg.snapshot(root)
    t0 = time.time()
    for lo in range(0, len(todo), chunk):
        part = todo[lo:lo + chunk]
        cases = [(GaussianPacketSpec(**c["packet"]), PotentialSpec.from_dict(c["potential"])) for c, _ in part]
        for (c, d), traj in zip(part, simulate_batch(cases, cfg.sim, cfg.method, chunk, cfg.n_workers)):
            traj.seed = c["id"]
            traj.save(d)
        echo(f"  {lo + len(part)}/{len(todo)} done ({time.time() - t0:.0f} s)")
    return dirs


def _trajectory_dirs(cfg: RunConfig) -> tuple[list[Path], list[int]]:
    root = _require(Layout(cfg.output).trajectories, "plan.json", "simulate")
    plan = json.loads((root / "plan.json").read_text())["cases"]
    dirs = [root / f"{c['id']:04d}" for c in plan]
    missing = [d for d in dirs if not (d / "manifest.json").exists()]
    if missing:
        raise MissingInputError(f"{len(missing)} of {len(dirs)} trajectories missing (first: {missing[0]}); "
                                "resume with `qdemu simulate`")
    return dirs, [c["id"] for c in plan]


def stage_curriculum(cfg: RunConfig, echo=click.echo) -> Dataset | LazyDataset:
    dirs, ids = _trajectory_dirs(cfg)
    if cfg.data.storage == "lazy":
        ds = LazyDataset.from_trajectories(iter_trajectories(dirs), cfg.window, ids=ids, count=len(dirs))
    else:
        ds = build_curriculum(iter_trajectories(dirs), cfg.window, ids=ids)
    out = Layout(cfg.output).dataset
    ds.save(out)
    cfg.snapshot(out)
    echo(f"curriculum: {len(ds)} windows from {len(dirs)} trajectories -> {out}")
    return ds


def load_dataset(cfg: RunConfig) -> Dataset | LazyDataset:
    path = _require(Layout(cfg.output).dataset, "manifest.json", "curriculum")
    ds = open_dataset(path)
    if ds.config != cfg.window:
        raise ConfigError(f"dataset at {path} was built with a different window config; rerun `qdemu curriculum`")
    return ds


def stage_train(cfg: RunConfig, dataset: Dataset | LazyDataset | None = None, echo=click.echo, out=None) -> Checkpoint:
    ds = dataset if dataset is not None else load_dataset(cfg)
    spec = cfg.model_spec
    out = Path(out) if out is not None else Layout(cfg.output).model(spec.kind)
    echo(f"training {spec.kind} ({Emulator.init(spec).n_params} parameters) on {len(ds)} windows")
    res = run_train(ds, spec, cfg.train, out_dir=out)
    ck = res.checkpoint
    ck.meta["dataset_fingerprint"] = ds.fingerprint()
    ck.save(out)
    cfg.snapshot(out)
    (out / "losses.csv").write_text("step,loss\n" + "".join(f"{s},{v:.9g}\n" for s, v in res.losses))
    echo(f"saved {out} (final loss {res.losses[-1][1]:.4e})")
    return ck


def load_model(cfg: RunConfig, kind: str | None = None, checkpoint=None) -> Emulator:
    path = Path(checkpoint) if checkpoint else Layout(cfg.output).model(kind or cfg.model.kind)
    return Checkpoint.load(_require(path, "params.json", "train")).emulator()


def build_suite(cfg: RunConfig) -> analysis.TestSuite:
    name, seed = cfg.suite.name, cfg.suite.seed
    if name == "free":
        return analysis.free_suite(seed)
    if name == "potential":
        return analysis.potential_suite(seed, cfg.sim)
    if name == "rect":
        return analysis.potential_suite(seed, cfg.sim).select("rect")
    if name == "non_gaussian":
        return analysis.non_gaussian_suite(seed, cfg.sim)
    return analysis.standard_suite(seed, cfg.sim)


def suite_truths(cfg: RunConfig, suite: analysis.TestSuite) -> list[Trajectory]:
    """Ground truth for a suite, cached under ``suites/`` in the output directory."""
    root = Layout(cfg.output).truths
    out = []
    pending = []
    for q, case in enumerate(suite.cases):
        ident = {"packet": asdict(case.packet), "potential": case.potential.to_dict(), "grid": asdict(cfg.sim),
                 "method": cfg.method}
        key = hashlib.sha256(json.dumps(ident, sort_keys=True).encode()).hexdigest()[:16]
        d = root / key
        if (d / "manifest.json").exists():
            out.append(Trajectory.load(d))
        else:
            out.append(None)
            pending.append((q, d))
    if pending:
        cases = [(suite.cases[q].packet, suite.cases[q].potential) for q, _ in pending]
        for (q, d), traj in zip(pending, simulate_batch(cases, cfg.sim, cfg.method, 16, cfg.n_workers)):
            traj.save(d)
            out[q] = traj
    return out


def stage_evaluate(cfg: RunConfig, model, tag: str, echo=click.echo) -> analysis.SuiteReport:
    suite = build_suite(cfg)
    truths = suite_truths(cfg, suite)
    rep = analysis.run_suite(model, suite, cfg.sim, cfg.rollout, cfg.window.v_scale, truths)
    out = Layout(cfg.output).eval(tag)
    out.mkdir(parents=True, exist_ok=True)
    rep.to_csv(out / "metrics.csv")
    with open(out / "curves.csv", "w") as fh:
        fh.write("case,step,mae,correlation\n")
        for r in rep.records:
            for s, (m, c) in enumerate(zip(r.mae, r.corr)):
                fh.write(f"{r.name},{s},{m:.9g},{c:.9g}\n")
    cfg.snapshot(out)
    echo(f"{tag}: <MAE>={rep.mean_mae:.5f} <C>={rep.mean_corr:.5f} over {len(rep.records)} cases -> {out}")
    return rep


# --------------------------------------------------------------------------
# click plumbing
# --------------------------------------------------------------------------


def _leaf_options(fn):
    """Attach ``--section.key`` for every configuration leaf."""
    for key in reversed(list(cfgmod.leaf_keys())):
        if key in ("output", "seed", "workers"):
            continue
        fn = click.option(f"--{key}", key.replace(".", "__"), default=None, metavar="VALUE",
                          help=f"override {key}")(fn)
    return fn


def with_config(fn):
    fn = _leaf_options(fn)
    fn = click.option("--workers", "workers", type=int, default=None, help="parallelism bound (default: all cores)")(fn)
    fn = click.option("--seed", "seed", type=int, default=None, help="master seed")(fn)
    fn = click.option("--output", "-o", "output", default=None, help="output directory")(fn)
    fn = click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None,
                      help="built-in scale preset applied before the config file")(fn)
    fn = click.option("--config", "-c", "config_path", type=click.Path(dir_okay=False), default=None,
                      help="YAML run configuration")(fn)
    return fn


def resolve(kwargs: dict, extra: dict | None = None) -> RunConfig:
    """Pop config-related kwargs and build the run configuration.

    Precedence, lowest first: preset, config file, flags.
    """
    preset = PRESETS[kwargs.pop("preset", None) or "full"]
    path = kwargs.pop("config_path", None)
    doc = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        doc = yaml.safe_load(p.read_text()) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
    in_file = set(_flatten(doc))
    overrides = {k: v for k, v in preset.items() if k not in in_file}
    for key in list(kwargs):
        if "__" in key or key in ("output", "seed", "workers"):
            val = kwargs.pop(key)
            if val is not None:
                overrides[key.replace("__", ".")] = val
    overrides.update({k: v for k, v in (extra or {}).items() if v is not None})
    return cfgmod.from_mapping(doc, overrides)


def _flatten(doc: dict) -> dict:
    out = {}
    for k, v in doc.items():
        if isinstance(v, dict):
            out.update({f"{k}.{s}": w for s, w in v.items()})
        else:
            out[k] = v
    return out


@click.group(context_settings={"help_option_names": ["-h", "--help"], "max_content_width": 100})
@click.option("--log-level", default="INFO", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]))
def cli(log_level):
    """Quantum-dynamics emulator: simulate, distil, train, roll out, analyse."""
    logging.basicConfig(level=log_level, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@with_config
@click.option("--dry-run", is_flag=True, help="only count planned and present trajectories")
def simulate(dry_run, **kw):
    """Simulate the training grid (resumable: finished cases are skipped)."""
    cfg = resolve(kw)
    stage_simulate(cfg, dry_run=dry_run)


@cli.command()
@with_config
def curriculum(**kw):
    """Sample training windows from the simulated trajectories."""
    stage_curriculum(resolve(kw))


@cli.command()
@with_config
@click.option("--model", "model_kind", type=click.Choice(ARCHITECTURES), default=None, help="alias of --model.kind")
@click.option("--channels", type=click.IntRange(2, 3), default=None, help="alias of --window.C")
def train(model_kind, channels, **kw):
    """Train one architecture on the curriculum."""
    cfg = resolve(kw, {"model.kind": model_kind, "window.C": channels})
    stage_train(cfg)


@cli.command()
@click.argument("path", type=click.Path(exists=True, file_okay=False))
def inspect(path):
    """Describe a checkpoint, dataset or trajectory directory."""
    p = Path(path)
    if (p / "params.json").exists():
        ck = Checkpoint.load(p)
        click.echo(f"checkpoint: {ck.spec.kind} K={ck.spec.K} W={ck.spec.W} H={ck.spec.H} C={ck.spec.C}")
        click.echo(f"parameters: {sum(a.size for a in ck.params.values())}")
        for name, shape in parameter_shapes(ck.spec).items():
            click.echo(f"  {name:<10} {'x'.join(map(str, shape))}")
        click.echo(f"step: {ck.step}  config hash: {ck.config_hash}")
    elif (p / "samples.f32").exists() or (p / "rows.i64").exists():
        m = json.loads((p / "manifest.json").read_text())
        c = m["config"]
        storage = m.get("storage", "materialized")
        click.echo(f"dataset ({storage}): {m['n_samples']} windows, input [{c['H']}, {c['W']}, {c['C']}]")
        click.echo(f"trajectories: {len(m['provenance'])}")
    elif (p / "psi_re.f32").exists():
        tr = Trajectory.load(p)
        drift = float(np.abs(tr.norms() - 1).max())
        click.echo(f"trajectory: {tr.psi.shape[0]} snapshots x {tr.psi.shape[1]} points, packet {tr.packet}")
        click.echo(f"potential: {tr.potential.shape}  max |norm - 1| = {drift:.2e}")
    else:
        raise MissingInputError(f"{p} is not a checkpoint, dataset or trajectory directory")


@cli.command()
@with_config
@click.option("--case", "case_names", multiple=True, help="suite case name (repeatable; default: every case)")
@click.option("--checkpoint", type=click.Path(file_okay=False), default=None)
@click.option("--oracle", is_flag=True, help="replay ground truth instead of a model")
def rollout(case_names, checkpoint, oracle, **kw):
    """Roll a model out on suite cases and store the predicted fields."""
    cfg = resolve(kw)
    suite = build_suite(cfg)
    if case_names:
        known = {c.name for c in suite.cases}
        bad = [n for n in case_names if n not in known]
        if bad:
            raise click.UsageError(f"unknown case(s) {bad}; available: {sorted(known)}")
        suite = analysis.TestSuite(suite.name, [c for c in suite.cases if c.name in case_names])
    model = None if oracle else load_model(cfg, checkpoint=checkpoint)
    for case, truth in zip(suite.cases, suite_truths(cfg, suite)):
        m = analysis._resolve_model("oracle", truth, cfg.rollout) if oracle else model
        res = run_rollout(m, truth, cfg.rollout, v_scale=cfg.window.v_scale)
        out = Path(cfg.output) / "rollouts" / case.name.replace(" ", "_").replace("/", "_")
        res.save(out, truth)
        cfg.snapshot(out)
        click.echo(f"{case.name}: <MAE>={res.mean_mae:.5f} <C>={res.mean_corr:.5f} -> {out}")


@cli.command()
@with_config
@click.option("--oracle", is_flag=True, help="evaluate the ground-truth oracle instead of a model")
@click.option("--checkpoint", type=click.Path(file_okay=False), default=None)
def evaluate(oracle, checkpoint, **kw):
    """Benchmark a model (or the oracle) on the configured test suite."""
    cfg = resolve(kw)
    model = "oracle" if oracle else load_model(cfg, checkpoint=checkpoint)
    stage_evaluate(cfg, model, "oracle" if oracle else cfg.model.kind)


@cli.command()
@with_config
@click.option("--axis", type=click.Choice(["S0", "E0", "W_b", "H_b", "H", "W", "K"]), required=True)
@click.option("--values", required=True, help="comma-separated sweep values")
@click.option("--seeds", type=int, default=5, help="models per value")
def sweep(axis, values, seeds, **kw):
    """Generalization (S0, E0, W_b, H_b) or hyper-parameter (H, W, K) sweep."""
    cfg = resolve(kw)
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise click.UsageError(f"--values must be numbers, got {values!r}") from None
    stage_sweep(cfg, axis, vals, seeds)


def stage_sweep(cfg: RunConfig, axis: str, vals, seeds: int, echo=click.echo) -> list[dict]:
    out = Path(cfg.output) / "sweeps"
    out.mkdir(parents=True, exist_ok=True)
    if axis in ("H", "W", "K"):
        dirs, ids = _trajectory_dirs(cfg)
        trajs = list(iter_trajectories(dirs))
        suite = build_suite(cfg)
        rows = analysis.hyperparameter_sweep(axis, [int(v) for v in vals], trajs, suite_truths(cfg, suite), seeds,
                                             cfg.window, cfg.model_spec, cfg.train, cfg.rollout)
    else:
        models = [_ensure_model(cfg, cfg.model.kind, s) for s in range(seeds)]
        rows = analysis.generalization_sweep(models, axis, vals, grid=cfg.sim, cfg=cfg.rollout,
                                             v_scale=cfg.window.v_scale)
    analysis.write_rows(rows, out / f"sweep_{axis}.csv")
    cfg.snapshot(out)
    for r in rows:
        echo(f"{axis}={r['value']:g}: <C>={r['mean_corr']:.5f}")
    return rows


@cli.command()
@with_config
@click.option("--samples", type=int, default=200, help="windows averaged")
@click.option("--checkpoint", type=click.Path(file_okay=False), default=None)
def interpret(samples, checkpoint, **kw):
    """Averaged input-gradient maps, Cauchy-Riemann deviations and recency."""
    cfg = resolve(kw)
    stage_interpret(cfg, load_model(cfg, checkpoint=checkpoint), samples)


def free_region_indices(ds: Dataset | LazyDataset, n: int, seed: int) -> np.ndarray:
    """Windows whose potential channel is zero everywhere, drawn without replacement."""
    pool = np.flatnonzero(ds.free_mask())
    if pool.size < n:
        raise ValueError(f"only {pool.size} free-region windows, need {n}")
    return np.sort(np.random.default_rng(seed).choice(pool, size=n, replace=False))


def stage_interpret(cfg: RunConfig, model: Emulator, samples: int = 200, echo=click.echo) -> dict:
    ds = load_dataset(cfg)
    out = Path(cfg.output) / "interpret" / model.spec.kind
    out.mkdir(parents=True, exist_ok=True)
    idx = free_region_indices(ds, samples, cfg.seed)
    mean, std = analysis.averaged_gradients(model, ds, indices=idx)
    control = Emulator.init(model.spec, seed=cfg.train.seed + 1000)
    cmean, _ = analysis.averaged_gradients(control, ds, indices=idx)
    result = {
        "trained": analysis.cauchy_riemann_check(mean),
        "random_init": analysis.cauchy_riemann_check(cmean),
        "recency_fraction": analysis.recency_fraction(model, ds.batch(idx)[0]),
        "samples": samples,
    }
    analysis.write_rows(analysis.attribution_rows(mean, std), out / "attribution.csv")
    (out / "cauchy_riemann.json").write_text(json.dumps(result, indent=2))
    cfg.snapshot(out)
    echo(json.dumps(result, indent=2))
    return result


@cli.command()
@with_config
@click.argument("target", type=click.Choice(TARGETS))
def reproduce(target, **kw):
    """Run the full chain behind a table or figure; finished stages are reused."""
    cfg = resolve(kw)
    run_target(cfg, target)


def _ensure_model(cfg: RunConfig, kind: str, replica: int = 0) -> Emulator:
    """Load (training first if absent) a model; replica r > 0 uses train.seed + r."""
    c = replace(cfg, model=replace(cfg.model, kind=kind), train=replace(cfg.train, seed=cfg.train.seed + replica))
    name = kind if replica == 0 else f"{kind}-seed{replica}"
    path = Layout(cfg.output).root / "models" / name
    if not (path / "params.json").exists():
        stage_train(c, _ensure_dataset(cfg), out=path)
    return load_model(c, checkpoint=path)


_DATASET_CACHE: dict = {}


def _ensure_dataset(cfg: RunConfig) -> Dataset | LazyDataset:
    key = str(Path(cfg.output).resolve())
    if key not in _DATASET_CACHE:
        lay = Layout(cfg.output)
        stage_simulate(cfg)
        _DATASET_CACHE[key] = load_dataset(cfg) if (lay.dataset / "manifest.json").exists() else stage_curriculum(cfg)
    return _DATASET_CACHE[key]


def run_target(cfg: RunConfig, target: str, echo=click.echo) -> Path:
    out = Path(cfg.output)
    cfg.snapshot(out)
    if target in ("table1", "s6"):
        if target == "s6":
            cfg = replace(cfg, data=replace(cfg.data, regime="free"), suite=replace(cfg.suite, name="free"))
        elif cfg.suite.name == "standard":
            cfg = replace(cfg, suite=replace(cfg.suite, name="rect"))
        rows = []
        for kind in ARCHITECTURES:
            model = _ensure_model(cfg, kind)
            rep = stage_evaluate(cfg, model, kind, echo)
            rows.append({"model": kind, "n_params": model.n_params, "mean_mae": rep.mean_mae,
                         "mean_corr": rep.mean_corr})
        path = out / f"{target}.csv"
        analysis.write_rows(rows, path)
        echo(f"wrote {path}")
        return path
    model = _ensure_model(cfg, cfg.model.kind)
    if target == "fig2":
        c = replace(cfg, suite=replace(cfg.suite, name="potential"), rollout=replace(cfg.rollout, n_steps=350))
        suite = build_suite(c).select("pyramid", "half_circle")
        rows = []
        for case, truth in zip(suite.cases, suite_truths(c, suite)):
            res = run_rollout(model, truth, c.rollout, v_scale=c.window.v_scale)
            res.save(out / "fig2" / case.name, truth)
            rows.append({"case": case.name, "mean_mae": res.mean_mae, "mean_corr": res.mean_corr})
        analysis.write_rows(rows, out / "fig2.csv")
        return out / "fig2.csv"
    if target in ("fig3", "s3", "s4", "s5"):
        name = {"fig3": "standard", "s3": "potential", "s4": "potential", "s5": "non_gaussian"}[target]
        stage_evaluate(replace(cfg, suite=replace(cfg.suite, name=name)), model, f"{target}-{model.spec.kind}", echo)
        return Path(cfg.output) / "eval"
    if target == "fig4":
        axes = {"S0": np.linspace(0.5, 8, 9), "E0": np.linspace(0.5, 14, 10),
                "W_b": np.linspace(1, 20, 9), "H_b": np.linspace(1, 25, 9)}
        for axis, vals in axes.items():
            stage_sweep(cfg, axis, vals.tolist(), 1, echo)
        return out / "sweeps"
    if target in ("fig5", "s7"):
        _ensure_dataset(cfg)
        stage_interpret(cfg, model, 200, echo)
        return out / "interpret"
    if target == "s8":
        for axis, vals in {"H": [1, 2, 4, 6], "W": [11, 17, 23, 31], "K": [23, 46, 69, 92]}.items():
            stage_sweep(cfg, axis, vals, 2, echo)
        return out / "sweeps"
    raise click.UsageError(f"unknown target {target}")


def main(argv=None) -> int:
    """Console entry; maps failures onto exit codes 1 (usage) and 2 (numerical)."""
    try:
        cli.main(args=argv, prog_name="qdemu", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (ConfigError, MissingInputError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
