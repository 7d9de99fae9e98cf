"""Benchmark suites, parameter sweeps and gradient attribution."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .curriculum import Dataset, WindowConfig, build_curriculum
from .models import Emulator, ModelSpec, as_tensors, forward
from .rollout import OracleModel, RolloutConfig, rollout
from .sim import GaussianPacketSpec, PotentialSpec, SimGrid, Trajectory, simulate_batch
from .training import TrainConfig, train

log = logging.getLogger(__name__)

CATEGORIES = ("free", "rect", "multi_rect", "irregular", "quadratic", "well", "pyramid", "half_circle",
              "non_gaussian")


# --------------------------------------------------------------------------
# test suites
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TestCase:
    name: str
    category: str
    packet: GaussianPacketSpec
    potential: PotentialSpec = PotentialSpec()

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")


@dataclass
class TestSuite:
    name: str
    cases: list

    def __len__(self):
        return len(self.cases)

    def select(self, *categories: str) -> "TestSuite":
        return TestSuite(f"{self.name}[{','.join(categories)}]",
                         [c for c in self.cases if c.category in categories])

    def census(self) -> dict:
        out: dict = {}
        for c in self.cases:
            out[c.category] = out.get(c.category, 0) + 1
        return out


def free_suite(seed: int = 2022) -> TestSuite:
    """12 freely dispersing packets drawn from X0 in (10, 90), S0 in (0.5, 9), E0 in (0, 9)."""
    rng = np.random.default_rng(seed)
    cases = []
    for q in range(12):
        x0, s0, e0 = rng.uniform(10, 90), rng.uniform(0.5, 9), rng.uniform(0, 9)
        cases.append(TestCase(f"free-{q:02d}", "free", GaussianPacketSpec(x0, s0, e0)))
    return TestSuite("free", cases)


def _incoming_packet(rng) -> GaussianPacketSpec:
    # starts left of the structure at the box centre and moves right
    return GaussianPacketSpec(rng.uniform(20, 35), rng.uniform(1, 3), rng.uniform(2, 8))


def _piecewise(grid: SimGrid, fn: Callable[[np.ndarray], np.ndarray]) -> PotentialSpec:
    return PotentialSpec("piecewise_samples", {"values": fn(grid.displacement(grid.L_x / 2)).tolist()})


def potential_suite(seed: int = 2022, grid: SimGrid = SimGrid()) -> TestSuite:
    """25 hand-designed landscapes.

    11 random rectangles, 2 double and 1 triple barrier, 7 irregular shapes
    (pyramid and half circle among them), 2 quadratic wells, 2 rectangular
    wells. The irregular geometries approximate hand-drawn figures and are
    labelled as approximations.
    """
    rng = np.random.default_rng(seed + 1)
    cases = []
    for q in range(11):
        pot = PotentialSpec.rectangular(float(rng.uniform(1, 14)), float(rng.uniform(2, 12)))
        cases.append(TestCase(f"rect-{q:02d}", "rect", _incoming_packet(rng), pot))
    doubles = [
        [{"height": 6.0, "width": 3.0, "center": 45.0}, {"height": 10.0, "width": 3.0, "center": 58.0}],
        [{"height": 12.0, "width": 1.5, "center": 48.0}, {"height": 12.0, "width": 1.5, "center": 53.0}],
    ]
    for q, bars in enumerate(doubles):
        cases.append(TestCase(f"double-{q}", "multi_rect", _incoming_packet(rng),
                              PotentialSpec("multi_rectangular", {"barriers": bars})))
    triple = [{"height": 5.0, "width": 2.0, "center": c} for c in (44.0, 50.0, 56.0)]
    cases.append(TestCase("triple-0", "multi_rect", _incoming_packet(rng),
                          PotentialSpec("multi_rectangular", {"barriers": triple})))
    cases.append(TestCase("pyramid", "pyramid", _incoming_packet(rng), PotentialSpec("pyramid")))
    cases.append(TestCase("half-circle", "half_circle", _incoming_packet(rng), PotentialSpec("half_circle")))
    irregular = {
        "staircase (approx.)": PotentialSpec("multi_rectangular", {"barriers": [
            {"height": 3.0, "width": 3.0, "center": 46.5}, {"height": 6.0, "width": 3.0, "center": 49.5},
            {"height": 9.0, "width": 3.0, "center": 52.5}]}),
        "ramp (approx.)": _piecewise(grid, lambda d: np.where(np.abs(d) < 5, 8 * (d + 5) / 10, 0.0)),
        "gaussian-bump (approx.)": _piecewise(grid, lambda d: 7 * np.exp(-d * d / 8)),
        "saw (approx.)": _piecewise(grid, lambda d: np.where(np.abs(d) < 6, 3 + 3 * ((d + 6) % 3) / 3, 0.0)),
        "step-notch (approx.)": PotentialSpec("multi_rectangular", {"barriers": [
            {"height": 10.0, "width": 6.0, "center": 50.0}, {"height": -6.0, "width": 1.0, "center": 50.0}]}),
    }
    for name, pot in irregular.items():
        cases.append(TestCase(name, "irregular", _incoming_packet(rng), pot))
    for q, curv in enumerate((0.004, 0.008)):
        cases.append(TestCase(f"quadratic-{q}", "quadratic", _incoming_packet(rng),
                              PotentialSpec("quadratic", {"curvature": curv})))
    for q, (depth, width) in enumerate(((4.0, 10.0), (8.0, 5.0))):
        cases.append(TestCase(f"well-{q}", "well", _incoming_packet(rng),
                              PotentialSpec("rectangular_well", {"depth": depth, "width": width})))
    return TestSuite("potential", cases)


def standard_suite(seed: int = 2022, grid: SimGrid = SimGrid()) -> TestSuite:
    """The 37-case benchmark: 12 free + 25 with a potential."""
    return TestSuite("standard", free_suite(seed).cases + potential_suite(seed, grid).cases)


def non_gaussian_suite(seed: int = 2022, grid: SimGrid = SimGrid()) -> TestSuite:
    """The potential cases re-run with triangle and square packet envelopes."""
    cases = []
    for c in potential_suite(seed, grid).cases:
        for mod in ("triangle", "square"):
            pk = replace(c.packet, modulation=mod)
            cases.append(TestCase(f"{c.name}/{mod}", "non_gaussian", pk, c.potential))
    return TestSuite("non_gaussian", cases)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


@dataclass
class MetricRecord:
    name: str
    category: str
    mae: np.ndarray
    corr: np.ndarray
    error: str = ""

    @property
    def mean_mae(self) -> float:
        return float(np.mean(self.mae)) if self.mae.size else float("nan")

    @property
    def mean_corr(self) -> float:
        return float(np.mean(self.corr)) if self.corr.size else float("nan")


@dataclass
class SuiteReport:
    records: list

    def _ok(self):
        return [r for r in self.records if not r.error]

    @property
    def mean_mae(self) -> float:
        ok = self._ok()
        return float(np.mean([r.mean_mae for r in ok])) if ok else float("nan")

    @property
    def mean_corr(self) -> float:
        ok = self._ok()
        return float(np.mean([r.mean_corr for r in ok])) if ok else float("nan")

    def by_category(self, *categories) -> "SuiteReport":
        return SuiteReport([r for r in self.records if r.category in categories])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case", "category", "mean_mae", "mean_corr", "final_corr", "steps", "error"])
        for r in self.records:
            final = f"{r.corr[-1]:.9g}" if r.corr.size else ""
            w.writerow([r.name, r.category, f"{r.mean_mae:.9g}", f"{r.mean_corr:.9g}", final, r.corr.size, r.error])
        w.writerow(["<all>", "", f"{self.mean_mae:.9g}", f"{self.mean_corr:.9g}", "", "", ""])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def simulate_suite(suite: TestSuite, grid: SimGrid = SimGrid(), method: str = "spectral") -> list[Trajectory]:
    return simulate_batch([(c.packet, c.potential) for c in suite.cases], grid, method=method, chunk=16)


def run_suite(model, suite: TestSuite, grid: SimGrid = SimGrid(), cfg: RolloutConfig = RolloutConfig(),
              v_scale: float = 15.0, truths: Sequence[Trajectory] | None = None) -> SuiteReport:
    """Roll the model out on every case and collect per-step metrics.

    ``model="oracle"`` replays the ground truth through the window machinery.
    A failing case is recorded with its error message; the suite continues.
    """
    if truths is None:
        truths = simulate_suite(suite, grid)
    records = []
    for case, traj in zip(suite.cases, truths):
        try:
            m = _resolve_model(model, traj, cfg)
            res = rollout(m, traj, cfg, v_scale=v_scale)
            err = "" if res.complete else res.message
            records.append(MetricRecord(case.name, case.category, res.mae, res.corr, err))
        except Exception as exc:  # recorded, not fatal
            log.warning("case %s failed: %s", case.name, exc)
            records.append(MetricRecord(case.name, case.category, np.array([]), np.array([]), str(exc)))
    return SuiteReport(records)


def _resolve_model(model, traj: Trajectory, cfg: RolloutConfig):
    if isinstance(model, str):
        if model != "oracle":
            raise ValueError(f"unknown model tag {model!r}")
        return OracleModel(traj, H=cfg.seed_steps)
    return model


def generalization_sweep(models: Sequence, axis: str, values: Sequence[float], base: dict | None = None,
                         grid: SimGrid = SimGrid(), cfg: RolloutConfig = RolloutConfig(),
                         v_scale: float = 15.0) -> list[dict]:
    """<C> against one simulation parameter, mean/min/max over model seeds.

    ``base`` holds the fixed parameters X0, S0, E0, H_b, W_b; ``axis`` is one
    of S0, E0, W_b, H_b.
    """
    if axis not in ("S0", "E0", "W_b", "H_b"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    if not models:
        raise ValueError("generalization_sweep needs at least one model (one per seed)")
    if any(m is None for m in models):
        raise ValueError("missing checkpoint for at least one seed")
    params = {"X0": 40.0, "S0": 2.5, "E0": 5.0, "H_b": 7.0, "W_b": 7.0}
    params.update(base or {})
    cases = []
    for val in values:
        p = dict(params, **{axis: float(val)})
        pot = PotentialSpec.rectangular(p["H_b"], p["W_b"]) if p["H_b"] and p["W_b"] else PotentialSpec.none()
        cases.append((GaussianPacketSpec(p["X0"], p["S0"], p["E0"]), pot))
    truths = simulate_batch(cases, grid, chunk=16)
    rows = []
    for val, traj in zip(values, truths):
        cs = [rollout(m, traj, cfg, v_scale=v_scale).mean_corr for m in models]
        rows.append({"axis": axis, "value": float(val), "mean_corr": float(np.mean(cs)),
                     "min_corr": float(np.min(cs)), "max_corr": float(np.max(cs)), "n_seeds": len(cs)})
    return rows


def write_rows(rows: Sequence[dict], path=None) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in r.items()})
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


# --------------------------------------------------------------------------
# attribution
# --------------------------------------------------------------------------


@dataclass
class AttributionMap:
    d_re: np.ndarray  # [H, W, C]
    d_im: np.ndarray  # [H, W, C]
    origin: tuple = ()


def _input_gradients(model: Emulator, inputs: np.ndarray, pixel: int | None = None, dtype=np.float32):
    """Per-sample gradients of the (Re, Im) output at ``pixel`` w.r.t. the inputs."""
    spec = model.spec
    pixel = spec.W // 2 if pixel is None else pixel
    params = as_tensors(model.params, dtype=dtype)
    out = []
    for part in (0, 1):
        x = Tensor(np.asarray(inputs, dtype=dtype), requires_grad=True)
        y = forward(spec, params, x)
        seed = np.zeros(y.shape, dtype=dtype)
        seed[:, pixel, part] = 1
        ad.backward(y, seed=seed)
        out.append(x.grad if x.grad is not None else np.zeros_like(x.data))
    return out[0], out[1]


def direct_gradients(model: Emulator, sample) -> AttributionMap:
    """Gradients of the centre output pixel's Re and Im part w.r.t. every input value."""
    inp = sample.input if hasattr(sample, "input") else np.asarray(sample)
    g_re, g_im = _input_gradients(model, inp[None])
    return AttributionMap(g_re[0], g_im[0], tuple(getattr(sample, "origin", ())))


def averaged_gradients(model: Emulator, dataset: Dataset, n: int = 200, seed: int = 0,
                       indices: np.ndarray | None = None):
    """Elementwise mean and standard deviation of attribution maps over n seeded draws."""
    if indices is None:
        if n > len(dataset):
            raise ValueError(f"n={n} exceeds dataset size {len(dataset)}")
        indices = np.sort(np.random.default_rng(seed).choice(len(dataset), size=n, replace=False))
    g_re, g_im = _input_gradients(model, dataset.batch(indices)[0])
    mean = AttributionMap(g_re.mean(0), g_im.mean(0), ("mean", n))
    std = AttributionMap(g_re.std(0), g_im.std(0), ("std", n))
    return mean, std


def attribution_rows(mean: AttributionMap, std: AttributionMap) -> list[dict]:
    rows = []
    h, w, c = mean.d_re.shape
    names = ("re", "im", "v")
    for t in range(h):
        for o in range(w):
            for ch in range(c):
                rows.append({"step": t, "offset": o - w // 2, "channel": names[ch],
                             "d_re_mean": float(mean.d_re[t, o, ch]), "d_re_std": float(std.d_re[t, o, ch]),
                             "d_im_mean": float(mean.d_im[t, o, ch]), "d_im_std": float(std.d_im[t, o, ch])})
    return rows


def _rel_dev(a: np.ndarray, b: np.ndarray) -> float:
    den = np.sqrt((np.sum(a * a) + np.sum(b * b)) / 2)
    if den == 0:
        raise ValueError("Cauchy-Riemann check: both gradient maps are zero")
    return float(np.linalg.norm(a - b) / den)


def cauchy_riemann_check(mean: AttributionMap) -> dict:
    """Deviation from dRe/dRe = dIm/dIm and dRe/dIm = -dIm/dRe.

    Each deviation is ||a - b|| / sqrt((||a||^2 + ||b||^2) / 2): 0 when the
    relation holds exactly, about 1 for unrelated maps.
    """
    d_re, d_im = np.asarray(mean.d_re, float), np.asarray(mean.d_im, float)
    return {"diagonal": _rel_dev(d_re[..., 0], d_im[..., 1]),
            "off_diagonal": _rel_dev(d_re[..., 1], -d_im[..., 0])}


def recency_fraction(model: Emulator, inputs: np.ndarray) -> float:
    """Share of windows whose two newest steps carry more attribution than the two oldest."""
    g_re, g_im = _input_gradients(model, inputs)
    mag = np.abs(g_re) + np.abs(g_im)
    old = mag[:, :2].mean(axis=(1, 2, 3))
    new = mag[:, -2:].mean(axis=(1, 2, 3))
    return float(np.mean(old < new))


# --------------------------------------------------------------------------
# hyper-parameter sweep
# --------------------------------------------------------------------------


def hyperparameter_sweep(axis: str, values: Sequence[int], trajectories: Sequence[Trajectory],
                         eval_truths: Sequence[Trajectory], n_seeds: int = 5,
                         window: WindowConfig = WindowConfig(), spec: ModelSpec = ModelSpec(),
                         train_cfg: TrainConfig = TrainConfig(), rollout_cfg: RolloutConfig = RolloutConfig()
                         ) -> list[dict]:
    """Train ``n_seeds`` models per value of H, W or K and score them on ``eval_truths``."""
    if axis not in ("H", "W", "K"):
        raise ValueError(f"unknown hyper-parameter axis {axis!r}")
    rows = []
    for val in values:
        val = int(val)
        wcfg = replace(window, **{axis: val}) if axis in ("H", "W") else window
        mspec = replace(spec, **{axis: val, "C": wcfg.C})
        rcfg = replace(rollout_cfg, seed_steps=mspec.H)
        maes, corrs, errors = [], [], []
        for s in range(n_seeds):
            try:
                ds = build_curriculum(trajectories, replace(wcfg, seed=window.seed + s))
                model = train(ds, mspec, replace(train_cfg, seed=train_cfg.seed + s)).checkpoint.emulator()
                recs = [rollout(model, tr, rcfg, v_scale=wcfg.v_scale) for tr in eval_truths]
                maes.append(float(np.mean([r.mean_mae for r in recs])))
                corrs.append(float(np.mean([r.mean_corr for r in recs])))
            except Exception as exc:  # recorded, not fatal
                log.warning("sweep %s=%s seed %d failed: %s", axis, val, s, exc)
                errors.append(f"seed {s}: {exc}")
        best = int(np.argmin(maes)) if maes else None
        rows.append({"axis": axis, "value": val,
                     "mean_mae": float(np.mean(maes)) if maes else float("nan"),
                     "mean_corr": float(np.mean(corrs)) if corrs else float("nan"),
                     "best_mae": maes[best] if best is not None else float("nan"),
                     "best_corr": corrs[best] if best is not None else float("nan"),
                     "n_ok": len(maes), "errors": "; ".join(errors)})
    return rows
