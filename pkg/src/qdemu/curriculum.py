"""Windowed training samples distilled from simulator trajectories."""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .sim import GaussianPacketSpec, PotentialSpec, Trajectory

DATASET_FORMAT = 1


@dataclass(frozen=True)
class WindowConfig:
    W: int = 23
    H: int = 4
    C: int = 3
    spatial_keep_prob: float = 0.1
    temporal_keep_prob: float = 0.9
    barrier_boost: float = 5.0
    v_scale: float = 15.0
    seed: int = 0

    def __post_init__(self):
        if self.W < 1 or self.W % 2 == 0:
            raise ValueError(f"window width must be odd, got W={self.W}")
        if self.H < 1:
            raise ValueError(f"history length must be >= 1, got H={self.H}")
        if self.C not in (2, 3):
            raise ValueError(f"channels must be 2 or 3, got C={self.C}")
        for name in ("spatial_keep_prob", "temporal_keep_prob"):
            p = getattr(self, name)
            if not 0 < p <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {p}")
        if self.barrier_boost <= 0 or self.v_scale <= 0:
            raise ValueError("barrier_boost and v_scale must be positive")


@dataclass
class WindowSample:
    input: np.ndarray  # [H, W, C]
    target: np.ndarray  # [W, 2]
    origin: tuple  # (trajectory id, center i, start step j)


def window_indices(center: int, width: int, n: int) -> np.ndarray:
    """Periodic grid indices covered by the window centred on ``center``."""
    return (center + np.arange(width) - width // 2) % n


def _frames_window(traj: Trajectory, centers: np.ndarray, j0: int, nframes: int, cfg: WindowConfig) -> np.ndarray:
    frames = traj.psi[j0:j0 + nframes]
    re = np.ascontiguousarray(frames.real, dtype=np.float32)
    im = np.ascontiguousarray(frames.imag, dtype=np.float32)
    v = np.ascontiguousarray(traj.v / cfg.v_scale, dtype=np.float32)
    out = np.empty((centers.shape[0], nframes, cfg.W, cfg.C), dtype=np.float32)
    return kernels.gather_windows(re, im, v, centers.astype(np.int64), cfg.W, out)


def extract_window(traj: Trajectory, i: int, j: int, cfg: WindowConfig, traj_id: int = 0) -> WindowSample:
    nt = traj.psi.shape[0]
    if not 0 <= j <= nt - 1 - cfg.H:
        raise IndexError(f"start step j={j} out of range [0, {nt - 1 - cfg.H}]")
    win = _frames_window(traj, np.array([i % traj.grid.N_x]), j, cfg.H + 1, cfg)[0]
    return WindowSample(win[: cfg.H].copy(), win[cfg.H, :, :2].copy(), (traj_id, int(i), int(j)))


def barrier_overlap(v: np.ndarray, width: int) -> np.ndarray:
    """Per-center flag: does the window at that center touch nonzero potential?"""
    n = v.shape[0]
    nz = (v != 0).astype(np.int64)
    # circular window sum via a padded cumulative sum
    half = width // 2
    padded = np.concatenate([nz[n - half:], nz, nz[: width - half - 1]]) if n >= width else None
    if padded is None:
        return np.array([nz[window_indices(c, width, n)].any() for c in range(n)])
    cs = np.concatenate([[0], np.cumsum(padded)])
    return (cs[width:] - cs[:-width]) > 0


def keep_probabilities(v: np.ndarray, cfg: WindowConfig) -> np.ndarray:
    p = np.full(v.shape[0], cfg.spatial_keep_prob * cfg.temporal_keep_prob)
    p[barrier_overlap(v, cfg.W)] *= cfg.barrier_boost
    return np.minimum(p, 1.0)


def sample_origins(traj: Trajectory, cfg: WindowConfig, traj_id: int) -> tuple[np.ndarray, np.ndarray]:
    """Kept (center, start step) pairs for one trajectory, from its own RNG stream."""
    nt, nx = traj.psi.shape
    nj = nt - cfg.H
    if nj < 1:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    rng = np.random.default_rng([cfg.seed, traj_id])
    p = keep_probabilities(traj.v, cfg)
    keep = rng.random((nj, nx)) < p[None, :]
    jj, ii = np.nonzero(keep)
    return ii.astype(np.int64), jj.astype(np.int64)


@dataclass
class Dataset:
    config: WindowConfig
    inputs: np.ndarray  # [n, H, W, C] float32
    targets: np.ndarray  # [n, W, 2] float32
    origins: np.ndarray  # [n, 3] int64 (trajectory id, i, j)
    provenance: list = field(default_factory=list)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_shape(self) -> tuple:
        return self.inputs.shape[1:]

    def batch(self, idx) -> tuple[np.ndarray, np.ndarray]:
        return self.inputs[idx], self.targets[idx]

    def free_mask(self) -> np.ndarray:
        """True for windows whose potential channel is zero everywhere."""
        if self.config.C < 3:
            return np.ones(len(self), bool)
        return ~np.any(self.inputs[..., 2] != 0, axis=(1, 2))

    def __getitem__(self, q) -> WindowSample:
        return WindowSample(self.inputs[q], self.targets[q], tuple(int(a) for a in self.origins[q]))

    @property
    def samples(self):
        return (self[q] for q in range(len(self)))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in (self.inputs, self.targets, self.origins):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        n = len(self)
        blob = np.concatenate([self.inputs.reshape(n, -1), self.targets.reshape(n, -1)], axis=1)
        blob.astype("<f4").tofile(path / "samples.f32")
        self.origins.astype("<i8").tofile(path / "origins.i64")
        manifest = {
            "format_version": DATASET_FORMAT,
            "config": asdict(self.config),
            "n_samples": n,
            "input_shape": list(self.inputs.shape[1:]),
            "target_shape": list(self.targets.shape[1:]),
            "layout": "sample-major; per sample input [H][W][C] then target [W][2], little-endian f32",
            "provenance": self.provenance,
        }
        (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
        return path

    @classmethod
    def load(cls, path, mmap: bool = False) -> "Dataset":
        path = Path(path)
        m = json.loads((path / "manifest.json").read_text())
        if m.get("format_version") != DATASET_FORMAT:
            raise ValueError(f"{path}: unsupported dataset format {m.get('format_version')}")
        n = m["n_samples"]
        ishape, tshape = tuple(m["input_shape"]), tuple(m["target_shape"])
        width = int(np.prod(ishape) + np.prod(tshape))
        if mmap:
            blob = np.memmap(path / "samples.f32", dtype="<f4", mode="r", shape=(n, width))
        else:
            blob = np.fromfile(path / "samples.f32", dtype="<f4").reshape(n, width)
        k = int(np.prod(ishape))
        inputs = np.asarray(blob[:, :k]).reshape((n,) + ishape).astype(np.float32, copy=False)
        targets = np.asarray(blob[:, k:]).reshape((n,) + tshape).astype(np.float32, copy=False)
        origins = np.fromfile(path / "origins.i64", dtype="<i8").reshape(n, 3)
        return cls(WindowConfig(**m["config"]), inputs, targets, origins, m.get("provenance", []))

    @classmethod
    def concatenate(cls, parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            raise ValueError("nothing to concatenate")
        return cls(parts[0].config,
                   np.concatenate([p.inputs for p in parts]),
                   np.concatenate([p.targets for p in parts]),
                   np.concatenate([p.origins for p in parts]),
                   list(itertools.chain.from_iterable(p.provenance for p in parts)))


def sample_trajectory(traj: Trajectory, cfg: WindowConfig, traj_id: int) -> Dataset:
    ii, jj = sample_origins(traj, cfg, traj_id)
    n = ii.shape[0]
    inputs = np.empty((n, cfg.H, cfg.W, cfg.C), dtype=np.float32)
    targets = np.empty((n, cfg.W, 2), dtype=np.float32)
    order = np.argsort(jj, kind="stable")
    ii, jj = ii[order], jj[order]
    bounds = np.flatnonzero(np.diff(jj)) + 1
    for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, n]):
        if lo == hi:
            continue
        win = _frames_window(traj, ii[lo:hi], int(jj[lo]), cfg.H + 1, cfg)
        inputs[lo:hi] = win[:, : cfg.H]
        targets[lo:hi] = win[:, cfg.H, :, :2]
    origins = np.stack([np.full(n, traj_id), ii, jj], axis=1).astype(np.int64)
    return Dataset(cfg, inputs, targets, origins, [traj.manifest()])


def build_curriculum(trajs: Iterable[Trajectory], cfg: WindowConfig = WindowConfig(),
                     ids: Iterable[int] | None = None) -> Dataset:
    """Sample windows from every trajectory and stack them into one dataset.

    ``ids`` gives each trajectory's id (and so its RNG stream); defaults to
    its position in ``trajs``.
    """
    parts = []
    ref = None
    ids = itertools.count() if ids is None else iter(ids)
    for traj in trajs:
        key = (traj.grid.N_x, traj.grid.dt)
        if ref is None:
            ref = key
        elif key != ref:
            raise ValueError(f"trajectories disagree on (N_x, dt): {key} vs {ref}")
        parts.append(sample_trajectory(traj, cfg, next(ids)))
    if not parts:
        raise ValueError("build_curriculum needs at least one trajectory")
    return Dataset.concatenate(parts)


class LazyDataset:
    """Windows gathered per batch from trajectories kept in memory as float32.

    Holds the same samples :func:`build_curriculum` would produce (same RNG
    streams, same ordering) without materializing them; at the default keep
    probabilities a few hundred trajectories yield tens of millions of windows.
    """

    def __init__(self, config: WindowConfig, re: np.ndarray, im: np.ndarray, v: np.ndarray,
                 rows: np.ndarray, ids: np.ndarray, provenance: list):
        self.config = config
        self.re, self.im, self.v = re, im, v  # [T, Nt, N], [T, Nt, N], [T, N]
        self.rows = rows  # [n, 3] (row in re/im, i, j)
        self.ids = ids  # trajectory id per row of re/im
        self.provenance = provenance

    @classmethod
    def from_trajectories(cls, trajs: Iterable[Trajectory], cfg: WindowConfig = WindowConfig(),
                          ids: Iterable[int] | None = None, count: int | None = None) -> "LazyDataset":
        """Sample origins and copy frames; ``count`` lets an iterator stream without a list."""
        if count is None:
            trajs = list(trajs)
            count = len(trajs)
        if count < 1:
            raise ValueError("LazyDataset needs at least one trajectory")
        ids = list(range(count)) if ids is None else list(ids)
        re = im = v = key = None
        parts, prov = [], []
        r = -1
        for r, (traj, tid) in enumerate(zip(trajs, ids)):
            if re is None:
                nt, nx = traj.psi.shape
                key = (nx, traj.grid.dt, nt)
                re = np.empty((count, nt, nx), np.float32)
                im = np.empty_like(re)
                v = np.empty((count, nx), np.float32)
            if (traj.grid.N_x, traj.grid.dt, traj.psi.shape[0]) != key:
                raise ValueError("trajectories disagree on grid or length")
            re[r], im[r] = traj.psi.real, traj.psi.imag
            v[r] = traj.v / cfg.v_scale
            ii, jj = sample_origins(traj, cfg, tid)
            order = np.argsort(jj, kind="stable")
            parts.append(np.stack([np.full(ii.shape[0], r), ii[order], jj[order]], axis=1))
            prov.append(traj.manifest())
        if r + 1 != count:
            raise ValueError(f"expected {count} trajectories, got {r + 1}")
        rows = np.concatenate(parts).astype(np.int64)
        return cls(cfg, re, im, v, rows, np.asarray(ids[:count], np.int64), prov)

    def __len__(self):
        return self.rows.shape[0]

    @property
    def input_shape(self) -> tuple:
        c = self.config
        return (c.H, c.W, c.C)

    @property
    def origins(self) -> np.ndarray:
        return np.column_stack([self.ids[self.rows[:, 0]], self.rows[:, 1:]])

    def batch(self, idx) -> tuple[np.ndarray, np.ndarray]:
        c = self.config
        rows = np.ascontiguousarray(self.rows[idx])
        win = np.empty((rows.shape[0], c.H + 1, c.W, c.C), np.float32)
        kernels.gather_samples(self.re, self.im, self.v, rows, c.W, win)
        return win[:, : c.H], np.ascontiguousarray(win[:, c.H, :, :2])

    def free_mask(self) -> np.ndarray:
        if self.config.C < 3:
            return np.ones(len(self), bool)
        touched = np.stack([barrier_overlap(v, self.config.W) for v in self.v])
        return ~touched[self.rows[:, 0], self.rows[:, 1]]

    def materialize(self) -> Dataset:
        inputs, targets = self.batch(np.arange(len(self)))
        return Dataset(self.config, np.ascontiguousarray(inputs), targets, self.origins, list(self.provenance))

    def fingerprint(self) -> str:
        h = hashlib.sha256(json.dumps(asdict(self.config), sort_keys=True).encode())
        for a in (self.rows, self.ids):
            h.update(np.ascontiguousarray(a, dtype="<i8").tobytes())
        h.update(json.dumps(self.provenance, sort_keys=True, default=str).encode())
        return h.hexdigest()

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        self.re.astype("<f4").tofile(path / "frames_re.f32")
        self.im.astype("<f4").tofile(path / "frames_im.f32")
        self.v.astype("<f4").tofile(path / "potential.f32")
        self.rows.astype("<i8").tofile(path / "rows.i64")
        manifest = {
            "format_version": DATASET_FORMAT,
            "storage": "lazy",
            "config": asdict(self.config),
            "n_samples": len(self),
            "frames_shape": list(self.re.shape),
            "trajectory_ids": self.ids.tolist(),
            "layout": "frames [T][Nt][N] f32 (scaled potential [T][N]); rows [n][3] = (frame block, i, j) i64",
            "provenance": self.provenance,
        }
        (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
        return path

    @classmethod
    def load(cls, path, mmap: bool = True) -> "LazyDataset":
        path = Path(path)
        m = json.loads((path / "manifest.json").read_text())
        if m.get("format_version") != DATASET_FORMAT or m.get("storage") != "lazy":
            raise ValueError(f"{path}: not a lazy dataset store")
        shape = tuple(m["frames_shape"])
        if mmap:
            re = np.memmap(path / "frames_re.f32", dtype="<f4", mode="r", shape=shape)
            im = np.memmap(path / "frames_im.f32", dtype="<f4", mode="r", shape=shape)
        else:
            re = np.fromfile(path / "frames_re.f32", dtype="<f4").reshape(shape)
            im = np.fromfile(path / "frames_im.f32", dtype="<f4").reshape(shape)
        v = np.fromfile(path / "potential.f32", dtype="<f4").reshape(shape[0], shape[2])
        rows = np.fromfile(path / "rows.i64", dtype="<i8").reshape(-1, 3)
        return cls(WindowConfig(**m["config"]), re, im, v, rows,
                   np.asarray(m["trajectory_ids"], np.int64), m.get("provenance", []))


def load_dataset(path, mmap: bool = True):
    """Open either store written by :meth:`Dataset.save` or :meth:`LazyDataset.save`."""
    m = json.loads((Path(path) / "manifest.json").read_text())
    if m.get("storage") == "lazy":
        return LazyDataset.load(path, mmap=mmap)
    return Dataset.load(path, mmap=mmap)


FREE_X0 = (10.0, 40.0, 70.0)
FREE_S0 = tuple(np.arange(1.0, 4.01, 0.5).tolist())
FREE_E0 = tuple(np.arange(1.0, 9.01, 1.0).tolist())
BARRIER_HB = tuple(np.arange(1.0, 14.01, 1.0).tolist())
BARRIER_WB = 7.0


def standard_training_grids():
    """(free cases, barrier cases) as lists of (packet, potential) pairs."""
    packets = [GaussianPacketSpec(x0, s0, e0) for x0, s0, e0 in itertools.product(FREE_X0, FREE_S0, FREE_E0)]
    free = [(p, PotentialSpec.none()) for p in packets]
    barrier = [(p, PotentialSpec.rectangular(hb, BARRIER_WB)) for p in packets for hb in BARRIER_HB]
    return free, barrier
