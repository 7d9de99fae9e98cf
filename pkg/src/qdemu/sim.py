"""Ground-truth wave-packet dynamics on a periodic 1D grid.

Atomic units throughout (hbar = m = 1). The Hamiltonian is
``-1/2 d^2/dx^2 + V(x)`` and every propagator is a symmetric (Strang)
split ``exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft

from . import kernels
from .errors import NumericalError

FORMAT_VERSION = 1
NORM_ABORT = 1e-6
METHODS = ("spectral", "tridiagonal")


@dataclass(frozen=True)
class SimGrid:
    L_x: float = 100.0
    N_x: int = 1024
    dt_int: float = 0.0005
    snapshot_stride: int = 200
    N_t: int = 500

    def __post_init__(self):
        if self.N_x < 2 or self.L_x <= 0:
            raise ValueError(f"bad grid size: L_x={self.L_x}, N_x={self.N_x}")
        if self.dt_int * self.snapshot_stride <= 0:
            raise ValueError("snapshot spacing dt_int * snapshot_stride must be > 0")
        if self.N_t < 1:
            raise ValueError("N_t must be >= 1")

    @property
    def dx(self) -> float:
        return self.L_x / self.N_x

    @property
    def dt(self) -> float:
        """Spacing between saved snapshots."""
        return self.dt_int * self.snapshot_stride

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N_x) * self.dx

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.N_x, d=self.dx)

    def displacement(self, origin: float) -> np.ndarray:
        """Minimum-image displacement x_i - origin on the periodic box."""
        d = self.x - origin
        return d - self.L_x * np.round(d / self.L_x)


@dataclass(frozen=True)
class GaussianPacketSpec:
    X0: float
    S0: float
    E0: float
    modulation: str = "gaussian"

    def __post_init__(self):
        if not self.S0 > 0:
            raise ValueError(f"packet spread must be positive, got S0={self.S0}")
        if self.E0 < 0:
            raise ValueError(f"packet energy must be >= 0, got E0={self.E0}")
        if self.modulation not in ("gaussian", "triangle", "square"):
            raise ValueError(f"unknown modulation {self.modulation!r}")

    @property
    def k0(self) -> float:
        return math.sqrt(2 * self.E0)


POTENTIAL_DEFAULTS = {
    "none": {},
    "rectangular": {"height": 14.0, "width": 7.0, "center": None},
    "multi_rectangular": {"barriers": []},
    "pyramid": {"n_steps": 3, "base": 12.0, "height": 9.0, "center": None},
    "half_circle": {"radius": 5.0, "peak": 8.0, "center": None},
    "quadratic": {"curvature": 0.005, "vertex": None},
    "rectangular_well": {"depth": 5.0, "width": 10.0, "center": None},
    "piecewise_samples": {"values": None},
}


@dataclass(frozen=True)
class PotentialSpec:
    shape: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.shape not in POTENTIAL_DEFAULTS:
            raise ValueError(f"unknown potential shape {self.shape!r}")
        unknown = set(self.params) - set(POTENTIAL_DEFAULTS[self.shape])
        if unknown:
            raise ValueError(f"unknown parameters for {self.shape}: {sorted(unknown)}")

    def resolved(self) -> dict:
        out = dict(POTENTIAL_DEFAULTS[self.shape])
        out.update(self.params)
        return out

    def to_dict(self) -> dict:
        params = dict(self.params)
        if isinstance(params.get("values"), np.ndarray):
            params["values"] = params["values"].tolist()
        return {"shape": self.shape, "params": params}

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        return cls(d["shape"], dict(d.get("params", {})))

    # convenience constructors
    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def rectangular(cls, height: float, width: float, center: float | None = None):
        return cls("rectangular", {"height": height, "width": width, "center": center})

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))


def _box(grid: SimGrid, center: float, width: float) -> np.ndarray:
    # half-open on the right: center - width/2 <= x < center + width/2
    d = grid.displacement(center)
    return (d >= -width / 2) & (d < width / 2)


def render_potential(grid: SimGrid, spec: PotentialSpec) -> np.ndarray:
    p = spec.resolved()
    mid = grid.L_x / 2
    v = np.zeros(grid.N_x)
    if spec.shape == "none":
        return v
    if spec.shape == "rectangular":
        v[_box(grid, p["center"] if p["center"] is not None else mid, p["width"])] = p["height"]
    elif spec.shape == "multi_rectangular":
        for b in p["barriers"]:
            c = b.get("center", mid)
            v[_box(grid, c, b["width"])] += b["height"]
    elif spec.shape == "pyramid":
        c = p["center"] if p["center"] is not None else mid
        n = int(p["n_steps"])
        if n < 1:
            raise ValueError("pyramid needs n_steps >= 1")
        d = np.abs(grid.displacement(c))
        for level in range(1, n + 1):
            w = p["base"] * (n - level + 1) / n
            v[d <= w / 2] = p["height"] * level / n
    elif spec.shape == "half_circle":
        c = p["center"] if p["center"] is not None else mid
        d = grid.displacement(c) / p["radius"]
        v = p["peak"] * np.sqrt(np.clip(1 - d * d, 0, None))
    elif spec.shape == "quadratic":
        c = p["vertex"] if p["vertex"] is not None else mid
        v = p["curvature"] * grid.displacement(c) ** 2
    elif spec.shape == "rectangular_well":
        c = p["center"] if p["center"] is not None else mid
        v[_box(grid, c, p["width"])] = -abs(p["depth"])
    elif spec.shape == "piecewise_samples":
        vals = np.asarray(p["values"], dtype=float)
        if vals.shape != (grid.N_x,):
            raise ValueError(f"piecewise_samples needs {grid.N_x} values, got {vals.shape}")
        v = vals.copy()
    return v


def init_packet(grid: SimGrid, spec: GaussianPacketSpec) -> np.ndarray:
    """Normalized initial wave packet sampled on the grid.

    The envelope and the carrier phase are evaluated on the minimum-image
    displacement from X0, so a packet close to the box edge stays smooth
    across the periodic seam.
    """
    if not 0 <= spec.X0 < grid.L_x:
        raise ValueError(f"X0={spec.X0} outside [0, {grid.L_x})")
    d = grid.displacement(spec.X0)
    if spec.modulation == "gaussian":
        env = np.exp(-d * d / (4 * spec.S0**2))
    elif spec.modulation == "triangle":
        env = np.clip(1 - np.abs(d) / (2 * spec.S0), 0, None)
    else:
        env = (np.abs(d) < 2 * spec.S0).astype(float)
    psi = env * np.exp(1j * spec.k0 * (spec.X0 + d))
    norm = np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    if norm == 0:
        raise ValueError("packet envelope is empty on this grid")
    return psi / norm


def free_gaussian(grid: SimGrid, spec: GaussianPacketSpec, t: float, images: int = 4) -> np.ndarray:
    """Closed-form freely dispersing Gaussian, periodized over the box."""
    s2 = spec.S0**2
    k0 = spec.k0
    width = 1 + 1j * t / (2 * s2)
    pref = (2 * np.pi * s2) ** -0.25 / np.sqrt(width)
    out = np.zeros(grid.N_x, dtype=complex)
    for n in range(-images, images + 1):
        xs = grid.x + n * grid.L_x
        out += pref * np.exp(
            -(xs - spec.X0 - k0 * t) ** 2 / (4 * s2 * width) + 1j * k0 * xs - 0.5j * k0 * k0 * t
        )
    return out


def norm(psi: np.ndarray, dx: float) -> np.ndarray:
    return np.sum(np.abs(psi) ** 2, axis=-1) * dx


def expectation_momentum(psi: np.ndarray, grid: SimGrid) -> float:
    phik = np.fft.fft(psi)
    return float(np.sum(grid.k * np.abs(phik) ** 2) / np.sum(np.abs(phik) ** 2))


def expectation_energy(psi: np.ndarray, v: np.ndarray, grid: SimGrid) -> float:
    phik = np.fft.fft(psi)
    kin = np.sum(0.5 * grid.k**2 * np.abs(phik) ** 2) / np.sum(np.abs(phik) ** 2)
    pot = np.sum(v * np.abs(psi) ** 2) / np.sum(np.abs(psi) ** 2)
    return float(kin + pot)


def center_of_mass(psi: np.ndarray, grid: SimGrid, reference: float) -> float:
    """<x> measured as a displacement from ``reference`` (minimum image)."""
    p = np.abs(psi) ** 2
    return float(reference + np.sum(grid.displacement(reference) * p) / np.sum(p))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalError("non-finite values in propagator input")


def propagate(psi, v, grid: SimGrid, n_internal_steps: int, method: str = "spectral",
              dt: float | None = None, workers: int = 1) -> np.ndarray:
    """Advance ``psi`` by ``n_internal_steps`` split-operator steps.

    ``psi`` may be a single state [N_x] or a batch [B, N_x]; ``v`` is [N_x]
    or [B, N_x]. A negative ``dt`` runs the propagator backwards.
    """
    if n_internal_steps < 1:
        raise ValueError("n_internal_steps must be >= 1")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    psi = np.asarray(psi, dtype=np.complex128)
    v = np.asarray(v, dtype=float)
    _check_finite(psi, v)
    dt = grid.dt_int if dt is None else dt
    single = psi.ndim == 1
    work = np.array(psi.reshape(1, -1) if single else psi, dtype=np.complex128, order="C")
    v2 = np.broadcast_to(v, work.shape)
    vhalf = np.exp(-0.5j * dt * v2)
    vfull = vhalf * vhalf
    if method == "spectral":
        kin = np.exp(-0.5j * dt * grid.k**2)
        work *= vhalf
        for s in range(n_internal_steps):
            work = sfft.ifft(sfft.fft(work, axis=-1, overwrite_x=True, workers=workers) * kin,
                             axis=-1, overwrite_x=True, workers=workers)
            if s < n_internal_steps - 1:
                work *= vfull
        work *= vhalf
    else:
        if grid.N_x % 2:
            raise ValueError("tridiagonal split needs an even N_x")
        a = dt / (2 * grid.dx**2)
        ce1, ce2 = kernels.pair_coefficients(a / 2)
        co1, co2 = kernels.pair_coefficients(a)
        kernels.space_split_steps(work, np.ascontiguousarray(vhalf), np.ascontiguousarray(vfull),
                                  n_internal_steps, ce1, ce2, co1, co2)
    return work[0] if single else work


@dataclass
class Trajectory:
    grid: SimGrid
    packet: GaussianPacketSpec
    potential: PotentialSpec
    psi: np.ndarray  # complex [N_t, N_x]
    v: np.ndarray  # real [N_x]
    seed: int | None = None
    method: str = "spectral"

    def norms(self) -> np.ndarray:
        return norm(self.psi, self.grid.dx)

    def manifest(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "grid": asdict(self.grid),
            "packet": asdict(self.packet),
            "potential": self.potential.to_dict(),
            "seed": self.seed,
            "method": self.method,
            "shape": list(self.psi.shape),
            "files": {"psi_re": "psi_re.f32", "psi_im": "psi_im.f32", "potential": "potential.f32"},
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        self.psi.real.astype("<f4").tofile(path / "psi_re.f32")
        self.psi.imag.astype("<f4").tofile(path / "psi_im.f32")
        np.asarray(self.v).astype("<f4").tofile(path / "potential.f32")
        # manifest last: its presence marks a complete store
        (path / "manifest.json").write_text(json.dumps(self.manifest(), indent=2))
        return path

    @classmethod
    def load(cls, path) -> "Trajectory":
        path = Path(path)
        m = json.loads((path / "manifest.json").read_text())
        if m.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported trajectory format {m.get('format_version')}")
        grid = SimGrid(**m["grid"])
        nt, nx = m["shape"]
        re = np.fromfile(path / "psi_re.f32", dtype="<f4").reshape(nt, nx)
        im = np.fromfile(path / "psi_im.f32", dtype="<f4").reshape(nt, nx)
        v = np.fromfile(path / "potential.f32", dtype="<f4").astype(float)
        psi = re.astype(np.float64) + 1j * im.astype(np.float64)
        return cls(grid, GaussianPacketSpec(**m["packet"]), PotentialSpec.from_dict(m["potential"]),
                   psi, v, seed=m.get("seed"), method=m.get("method", "spectral"))


def simulate_batch(cases: Sequence[tuple[GaussianPacketSpec, PotentialSpec]], grid: SimGrid = SimGrid(),
                   method: str = "spectral", chunk: int = 64, workers: int = 1,
                   check_norm: float = NORM_ABORT) -> list[Trajectory]:
    """Simulate many cases, advancing them together in batches."""
    out: list[Trajectory] = []
    for start in range(0, len(cases), chunk):
        part = cases[start:start + chunk]
        psi = np.stack([init_packet(grid, p) for p, _ in part])
        v = np.stack([render_potential(grid, pot) for _, pot in part])
        frames = np.empty((len(part), grid.N_t, grid.N_x), dtype=np.complex128)
        frames[:, 0] = psi
        for j in range(1, grid.N_t):
            psi = propagate(psi, v, grid, grid.snapshot_stride, method=method, workers=workers)
            if not np.all(np.isfinite(psi)):
                raise NumericalError(f"propagation produced NaN at snapshot {j}")
            drift = np.abs(norm(psi, grid.dx) - 1).max()
            if drift > check_norm:
                raise NumericalError(
                    f"norm drift {drift:.3e} at snapshot {j} exceeds {check_norm:g}; "
                    f"check dt_int={grid.dt_int} and dx={grid.dx}")
            frames[:, j] = psi
        for b, (packet, pot) in enumerate(part):
            out.append(Trajectory(grid, packet, pot, frames[b], v[b], method=method))
    return out


def run_simulation(packet: GaussianPacketSpec, potential: PotentialSpec = PotentialSpec(),
                   grid: SimGrid = SimGrid(), method: str = "spectral") -> Trajectory:
    return simulate_batch([(packet, potential)], grid, method=method)[0]


def iter_trajectories(paths: Iterable) -> Iterable[Trajectory]:
    for p in paths:
        yield Trajectory.load(p)
