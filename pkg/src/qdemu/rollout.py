"""Window-wise inference, Gaussian-weighted reassembly and recurrent rollout."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .metrics import mae_per_step, normalized_correlation
from .sim import Trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RolloutConfig:
    delta: float = 3.0  # reassembly spread in grid points
    n_steps: int = 400
    seed_steps: int = 4
    stride: int = 1
    renormalize: bool = False
    batch: int = 4096

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.stride < 1 or self.n_steps < 0 or self.seed_steps < 1:
            raise ValueError("stride and seed_steps must be >= 1, n_steps >= 0")


def reassembly_weights(width: int, delta: float) -> np.ndarray:
    """Normalized Gaussian weights indexed by position inside a window.

    Entry ``o`` belongs to offset ``o - width // 2`` from the window centre.
    """
    offsets = np.arange(width) - width // 2
    w = np.exp(-offsets.astype(float) ** 2 / (2 * delta**2))
    return w / w.sum()


class OracleModel:
    """Returns ground-truth next-step windows; used to test the plumbing."""

    def __init__(self, traj: Trajectory, W: int = 23, H: int = 4, C: int = 3):
        self.traj = traj
        self.W, self.H, self.C = W, H, C

    def predict_windows(self, windows, centers=None, step=None):
        if step is None or centers is None:
            raise ValueError("oracle needs the target step and window centres")
        frame = self.traj.psi[step]
        idx = (np.asarray(centers)[:, None] + np.arange(self.W)[None, :] - self.W // 2) % frame.shape[0]
        out = np.empty((len(centers), self.W, 2), dtype=np.float32)
        out[..., 0] = frame.real[idx]
        out[..., 1] = frame.imag[idx]
        return out


def _model_shape(model) -> tuple[int, int, int]:
    if hasattr(model, "spec"):
        return model.spec.W, model.spec.H, model.spec.C
    return model.W, model.H, model.C


def predict_step(model, frames: np.ndarray, v_norm: np.ndarray, cfg: RolloutConfig = RolloutConfig(),
                 step: int | None = None) -> np.ndarray:
    """Predict the frame following ``frames`` [H, N_x] (oldest first).

    ``v_norm`` is the potential already divided by the curriculum's v_scale.
    Every grid point receives the Gaussian-weighted average of the estimates
    from all windows covering it.
    """
    W, H, C = _model_shape(model)
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] != H:
        raise ValueError(f"expected {H} frames, got array of shape {frames.shape}")
    n = frames.shape[1]
    if np.shape(v_norm) != (n,):
        raise ValueError(f"potential length {np.shape(v_norm)} does not match frame length {n}")
    re = np.ascontiguousarray(frames.real, dtype=np.float32)
    im = np.ascontiguousarray(frames.imag, dtype=np.float32)
    v = np.ascontiguousarray(v_norm, dtype=np.float32)
    centers = np.arange(0, n, cfg.stride, dtype=np.int64)
    weights = reassembly_weights(W, cfg.delta)
    acc_re = np.zeros(n)
    acc_im = np.zeros(n)
    wsum = np.zeros(n)
    for lo in range(0, centers.shape[0], cfg.batch):
        c = centers[lo:lo + cfg.batch]
        win = kernels.gather_windows(re, im, v, c, W, np.empty((c.shape[0], H, W, C), dtype=np.float32))
        pred = np.asarray(model.predict_windows(win, centers=c, step=step), dtype=np.float64)
        kernels.overlap_add(pred, c, weights, n, acc_re, acc_im, wsum)
    if np.any(wsum == 0):
        raise ValueError("stride leaves grid points without any covering window")
    return (acc_re + 1j * acc_im) / wsum


@dataclass
class RolloutResult:
    predicted: np.ndarray  # complex [n_steps, N_x]
    truth: np.ndarray | None
    mae: np.ndarray
    corr: np.ndarray
    complete: bool = True
    message: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def mean_mae(self) -> float:
        return float(np.mean(self.mae)) if self.mae.size else float("nan")

    @property
    def mean_corr(self) -> float:
        return float(np.mean(self.corr)) if self.corr.size else float("nan")

    def save(self, path, traj: Trajectory | None = None) -> Path:
        """Predicted field in the trajectory store format plus metrics.csv."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        if traj is not None:
            Trajectory(traj.grid, traj.packet, traj.potential, self.predicted, traj.v).save(path)
        else:
            self.predicted.real.astype("<f4").tofile(path / "psi_re.f32")
            self.predicted.imag.astype("<f4").tofile(path / "psi_im.f32")
        lines = ["step,mae,correlation"]
        for s in range(len(self.mae)):
            lines.append(f"{s},{self.mae[s]:.9g},{self.corr[s]:.9g}")
        (path / "metrics.csv").write_text("\n".join(lines) + "\n")
        info = {"complete": self.complete, "message": self.message, "mean_mae": self.mean_mae,
                "mean_corr": self.mean_corr, **self.meta}
        (path / "rollout.json").write_text(json.dumps(info, indent=2))
        return path


def rollout(model, traj: Trajectory, cfg: RolloutConfig = RolloutConfig(), v_scale: float = 15.0,
            compare: bool = True) -> RolloutResult:
    """Seed with the first ``seed_steps`` true frames, then feed predictions back."""
    W, H, C = _model_shape(model)
    if cfg.seed_steps != H:
        raise ValueError(f"seed_steps={cfg.seed_steps} must equal the model history H={H}")
    nt, n = traj.psi.shape
    if compare and nt < cfg.seed_steps + cfg.n_steps:
        raise ValueError(f"trajectory has {nt} snapshots, need {cfg.seed_steps + cfg.n_steps}")
    v_norm = traj.v / v_scale
    window = [traj.psi[j] for j in range(cfg.seed_steps)]
    preds = np.empty((cfg.n_steps, n), dtype=np.complex128)
    mae, corr = [], []
    done, message = cfg.n_steps, ""
    for s in range(cfg.n_steps):
        target_step = cfg.seed_steps + s
        frame = predict_step(model, np.stack(window), v_norm, cfg, step=target_step)
        if not np.all(np.isfinite(frame)):
            done, message = s, f"non-finite prediction at step {s}; rollout truncated"
            log.warning(message)
            break
        if cfg.renormalize:
            nrm = np.sqrt(np.sum(np.abs(frame) ** 2) * traj.grid.dx)
            if nrm > 0:
                frame = frame / nrm
        preds[s] = frame
        if compare:
            truth = traj.psi[target_step]
            mae.append(mae_per_step(frame, truth))
            corr.append(normalized_correlation(frame, truth) if np.any(frame) else 0.0)
        window = window[1:] + [frame]
    truth = traj.psi[cfg.seed_steps:cfg.seed_steps + done] if compare else None
    return RolloutResult(preds[:done], truth, np.array(mae), np.array(corr), done == cfg.n_steps, message,
                         {"config": asdict(cfg), "v_scale": v_scale})
