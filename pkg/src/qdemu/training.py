"""Loss, AdamW, learning-rate schedule, training loop and checkpoints."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .curriculum import Dataset
from .errors import NumericalError
from .models import Emulator, ModelSpec, as_tensors, build_model, forward, parameter_shapes

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 128
    lr_peak: float = 1e-3
    lr_final: float = 1e-6
    warmup_fraction: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    weight_decay: float = 1.0
    clip_norm: float = 1.0
    seed: int = 0
    log_every: int = 100

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def mse_loss(pred: Tensor, target) -> Tensor:
    """(1/W) sum over the window of |pred - target|^2, averaged over the batch.

    Real and imaginary parts are the two components of each squared modulus,
    so this is 2 * mean over all entries.
    """
    target = ad.as_tensor(target, like=pred)
    if pred.shape != target.shape:
        raise ValueError(f"mse_loss: shape mismatch {pred.shape} vs {target.shape}")
    return ad.mean_square(pred - target) * 2.0


def lr_at(step: int, total_steps: int, cfg: TrainConfig = TrainConfig()) -> float:
    """Linear warm-up 0 -> lr_peak, then linear decay lr_peak -> lr_final."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warm = max(1, int(round(cfg.warmup_fraction * total_steps)))
    if step <= warm:
        return cfg.lr_peak * step / warm
    if total_steps == warm:
        return cfg.lr_peak
    frac = (step - warm) / (total_steps - warm)
    return cfg.lr_peak + (cfg.lr_final - cfg.lr_peak) * frac


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads)))


def clip_by_global_norm(grads: dict[str, np.ndarray], clip: float) -> float:
    """Scale ``grads`` in place so their global norm is at most ``clip``; returns the pre-clip norm."""
    n = global_norm(grads.values())
    if clip > 0 and n > clip:
        s = np.float32(clip / n)
        for g in grads.values():
            g *= s
    return n


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({n: np.zeros_like(a) for n, a in params.items()},
                   {n: np.zeros_like(a) for n, a in params.items()})


def adamw_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
               cfg: TrainConfig, lr: float) -> None:
    """One decoupled-weight-decay Adam update, in place.

    theta <- theta - lr * wd * theta, then the bias-corrected Adam step.
    """
    for n, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {n} at step {state.step + 1}")
    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    for n, p in params.items():
        g = grads[n]
        m, v = state.m[n], state.v[n]
        if cfg.weight_decay:
            p *= np.float32(1 - lr * cfg.weight_decay)
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)).astype(p.dtype, copy=False)


@dataclass
class Checkpoint:
    spec: ModelSpec
    params: dict[str, np.ndarray]
    state: AdamState | None = None
    step: int = 0
    config_hash: str = ""
    meta: dict = field(default_factory=dict)

    def emulator(self) -> Emulator:
        return Emulator(self.spec, self.params)

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        names = list(parameter_shapes(self.spec))
        manifest = {
            "format_version": CHECKPOINT_FORMAT,
            "spec": self.spec.to_dict(),
            "order": names,
            "shapes": {n: list(self.params[n].shape) for n in names},
            "dtype": "float32 little-endian",
            "step": self.step,
            "config_hash": self.config_hash,
            "n_params": int(sum(self.params[n].size for n in names)),
            "meta": self.meta,
        }
        np.concatenate([self.params[n].ravel() for n in names]).astype("<f4").tofile(path / "params.bin")
        if self.state is not None:
            flat = [self.state.m[n].ravel() for n in names] + [self.state.v[n].ravel() for n in names]
            np.concatenate(flat).astype("<f4").tofile(path / "optimizer.bin")
            manifest["optimizer"] = {"file": "optimizer.bin", "layout": "m then v, manifest order",
                                     "step": self.state.step}
        (path / "params.json").write_text(json.dumps(manifest, indent=2))
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        m = json.loads((path / "params.json").read_text())
        if m.get("format_version") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unsupported checkpoint format {m.get('format_version')}")
        spec = ModelSpec(**m["spec"])
        flat = np.fromfile(path / "params.bin", dtype="<f4")
        params, off = {}, 0
        for n in m["order"]:
            shape = tuple(m["shapes"][n])
            size = int(np.prod(shape))
            params[n] = flat[off:off + size].reshape(shape).astype(np.float32)
            off += size
        state = None
        if "optimizer" in m:
            oflat = np.fromfile(path / m["optimizer"]["file"], dtype="<f4")
            mm, vv, off = {}, {}, 0
            for target in (mm, vv):
                for n in m["order"]:
                    size = params[n].size
                    target[n] = oflat[off:off + size].reshape(params[n].shape).astype(np.float32)
                    off += size
            state = AdamState(mm, vv, m["optimizer"]["step"])
        return cls(spec, params, state, m["step"], m["config_hash"], m.get("meta", {}))


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    losses: list  # (step, loss) every log_every steps
    grad_norms: list = field(default_factory=list)  # post-clip global norms per step


def _check_shapes(dataset: Dataset, spec: ModelSpec):
    if tuple(dataset.input_shape) != spec.input_shape:
        raise ValueError(f"dataset input shape {tuple(dataset.input_shape)} != model {spec.input_shape}")


def evaluate_loss(spec: ModelSpec, params: dict[str, np.ndarray], dataset: Dataset, batch: int = 4096) -> float:
    p = as_tensors(params)
    total = 0.0
    for lo in range(0, len(dataset), batch):
        xb, yb = dataset.batch(np.arange(lo, min(lo + batch, len(dataset))))
        pred = forward(spec, p, Tensor(xb))
        diff = pred.data.astype(np.float64) - yb
        total += float(np.sum(diff * diff)) / spec.W
    return total / len(dataset)


def train(dataset: Dataset, spec: ModelSpec, cfg: TrainConfig = TrainConfig(),
          init: dict[str, np.ndarray] | None = None, record_grad_norms: bool = False,
          out_dir=None) -> TrainResult:
    """Shuffled mini-batch training with clip -> AdamW -> schedule each step.

    On a NaN loss the last good checkpoint is written to ``out_dir`` (when
    given) and :class:`NumericalError` is raised.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    _check_shapes(dataset, spec)
    params = {n: a.copy() for n, a in (init or build_model(spec, cfg.seed)).items()}
    state = AdamState.zeros_like(params)
    n = len(dataset)
    steps_per_epoch = -(-n // cfg.batch_size)
    total = steps_per_epoch * cfg.epochs
    tensors = as_tensors(params, requires_grad=True)
    losses, norms = [], []
    step = 0
    last_good = None
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = np.sort(order[lo:lo + cfg.batch_size])
            xb, y = dataset.batch(idx)
            x = Tensor(xb)
            ad.zero_grad(tensors)
            loss = mse_loss(forward(spec, tensors, x), y)
            lval = float(loss.data)
            if not np.isfinite(lval):
                if out_dir is not None and last_good is not None:
                    Checkpoint(spec, last_good, None, step, cfg.hash()).save(out_dir)
                raise NumericalError(f"loss became {lval} at step {step + 1} (epoch {epoch})")
            ad.backward(loss)
            grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in tensors.items()}
            clip_by_global_norm(grads, cfg.clip_norm)
            if record_grad_norms:
                norms.append(global_norm(grads.values()))
            step += 1
            adamw_step(params, grads, state, cfg, lr_at(step, total, cfg))
            if step % cfg.log_every == 0 or step == total:
                losses.append((step, lval))
                log.debug("epoch %d step %d/%d loss %.3e", epoch, step, total, lval)
            if out_dir is not None and step % 1000 == 0:
                last_good = {k: a.copy() for k, a in params.items()}
    ckpt = Checkpoint(spec, params, state, step, cfg.hash(),
                      {"dataset_fingerprint": None, "n_samples": n, "epochs": cfg.epochs})
    return TrainResult(ckpt, losses, norms)
