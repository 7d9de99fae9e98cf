import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdemu.models import Emulator, ModelSpec
from qdemu.rollout import OracleModel, RolloutConfig, predict_step, reassembly_weights, rollout
from qdemu.sim import GaussianPacketSpec, PotentialSpec, SimGrid, Trajectory, run_simulation

from conftest import SMALL


@pytest.fixture(scope="module")
def traj():
    g = SimGrid(L_x=25.0, N_x=256, N_t=30)
    return run_simulation(GaussianPacketSpec(8.0, 1.0, 4.0), PotentialSpec.rectangular(5.0, 2.0), g)


@given(w=st.sampled_from([1, 5, 23, 41]), delta=st.floats(0.1, 50))
def test_weights_normalized_symmetric_peaked(w, delta):
    wt = reassembly_weights(w, delta)
    assert wt.sum() == pytest.approx(1.0)
    assert np.allclose(wt, wt[::-1])
    assert wt.argmax() == w // 2


def test_weights_values():
    wt = reassembly_weights(5, 1.0)
    raw = np.exp(-np.array([4, 1, 0, 1, 4]) / 2)
    assert np.allclose(wt, raw / raw.sum())


@pytest.mark.parametrize("delta", [2.0, 3.5, 8.0])
def test_oracle_rollout_reproduces_truth(traj, delta):
    cfg = RolloutConfig(delta=delta, n_steps=20)
    res = rollout(OracleModel(traj), traj, cfg)
    assert res.complete
    assert np.max(np.abs(res.predicted - traj.psi[4:24])) < 1e-6
    assert np.allclose(res.corr, 1.0, atol=1e-12)


def test_oracle_with_stride(traj):
    cfg = RolloutConfig(n_steps=5, stride=3)
    res = rollout(OracleModel(traj), traj, cfg)
    assert np.max(np.abs(res.predicted - traj.psi[4:9])) < 1e-6


def test_stride_larger_than_window_rejected(traj):
    with pytest.raises(ValueError, match="without any covering window"):
        rollout(OracleModel(traj), traj, RolloutConfig(n_steps=2, stride=30))


class ShiftModel:
    """Predicts the last frame shifted right by one grid point."""

    W, H, C = 23, 4, 3

    def predict_windows(self, windows, centers=None, step=None):
        last = windows[:, -1, :, :2]
        out = np.empty_like(last)
        out[:, 1:] = last[:, :-1]
        out[:, 0] = last[:, 0]
        return out


def test_reassembly_of_a_translation(traj):
    # away from window edges every estimate agrees, so reassembly returns the roll
    frames = np.stack([traj.psi[j] for j in range(4)])
    nxt = predict_step(ShiftModel(), frames, traj.v / 15, RolloutConfig())
    assert np.allclose(nxt, np.roll(frames[-1], 1), atol=0.05 * np.abs(frames[-1]).max())


def test_translation_equivariance():
    em = Emulator.init(ModelSpec("gru"), seed=0)
    g = SMALL
    base = run_simulation(GaussianPacketSpec(8.0, 1.0, 3.0), PotentialSpec.rectangular(4.0, 2.0, 12.0), g)
    frames, v = base.psi[:4], base.v / 15
    a = predict_step(em, frames, v)
    b = predict_step(em, np.roll(frames, 37, axis=1), np.roll(v, 37))
    assert np.allclose(np.roll(a, 37), b, atol=1e-5)


def test_batching_does_not_change_result(traj):
    em = Emulator.init(ModelSpec("dense"), seed=2)
    frames, v = traj.psi[:4], traj.v / 15
    assert np.allclose(predict_step(em, frames, v, RolloutConfig(batch=4096)),
                       predict_step(em, frames, v, RolloutConfig(batch=37)), atol=1e-7)


def test_rollout_input_validation(traj):
    em = Emulator.init(ModelSpec("linear"))
    with pytest.raises(ValueError, match="seed_steps"):
        rollout(em, traj, RolloutConfig(seed_steps=3))
    with pytest.raises(ValueError, match="snapshots"):
        rollout(em, traj, RolloutConfig(n_steps=400))
    with pytest.raises(ValueError, match="potential length"):
        predict_step(em, traj.psi[:4], np.zeros(5))
    with pytest.raises(ValueError):
        RolloutConfig(delta=0)


class BlowUp:
    W, H, C = 23, 4, 3

    def predict_windows(self, windows, centers=None, step=None):
        return windows[:, -1, :, :2] * np.float32(1e30)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergent_rollout_is_truncated(traj):
    res = rollout(BlowUp(), traj, RolloutConfig(n_steps=20))
    assert not res.complete
    assert "truncated" in res.message
    assert len(res.mae) == len(res.predicted) < 20


def test_renormalize_keeps_unit_norm(traj):
    em = Emulator.init(ModelSpec("linear"), seed=0)
    res = rollout(em, traj, RolloutConfig(n_steps=3, renormalize=True))
    assert np.allclose(np.sum(np.abs(res.predicted) ** 2, axis=1) * traj.grid.dx, 1.0)


def test_result_save(tmp_path, traj):
    res = rollout(OracleModel(traj), traj, RolloutConfig(n_steps=5))
    res.save(tmp_path / "r", traj)
    back = Trajectory.load(tmp_path / "r")
    assert back.psi.shape == (5, traj.grid.N_x)
    lines = (tmp_path / "r" / "metrics.csv").read_text().splitlines()
    assert lines[0] == "step,mae,correlation" and len(lines) == 6
