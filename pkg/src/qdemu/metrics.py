import numpy as np


def mae_per_step(pred, truth) -> float:
    """Spatial mean of the complex-modulus error."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean(np.abs(pred - truth)))


def normalized_correlation(pred, truth) -> float:
    """Real part of the normalized complex overlap <pred|truth>."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    na, nb = np.linalg.norm(pred), np.linalg.norm(truth)
    if na == 0 or nb == 0:
        raise ValueError("normalized correlation is undefined for a zero-norm field")
    return float(np.vdot(pred, truth).real / (na * nb))
