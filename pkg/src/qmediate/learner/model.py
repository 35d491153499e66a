"""Variational classifier: prediction, loss, parameter-shift gradients and Adam."""

from dataclasses import dataclass, field
import json
import math
from pathlib import Path

import numpy as np

from .. import rng as rngs
from ..errors import InputError, ShapeError, UnsupportedGateError
from ..simulator import CircuitSpec, batch_states, z0_values

FORMAT = "qmediate.model/1"
CLIP = 1e-10
SHIFT = math.pi / 2


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_std: float = 0.01
    validation_fraction: float = 0.3
    # return the parameters with the lowest validation loss instead of the last ones
    use_best_epoch: bool = False


@dataclass
class TrainedModel:
    spec: CircuitSpec
    theta_star: np.ndarray
    seed: int
    train_history: list = field(default_factory=list)  # [(train_loss, val_loss), ...] per epoch
    initial_loss: float = float("nan")
    theta_final: np.ndarray = None
    theta_best: np.ndarray = None
    best_epoch: int = -1
    arm: int = 0

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "topology": self.spec.topology.value,
            "n_qubits": self.spec.n_qubits,
            "n_layers": self.spec.n_layers,
            "seed": self.seed,
            "arm": self.arm,
            "theta_star": self.theta_star.reshape(-1).tolist(),
            "theta_final": None if self.theta_final is None else self.theta_final.reshape(-1).tolist(),
            "theta_best": None if self.theta_best is None else self.theta_best.reshape(-1).tolist(),
            "best_epoch": self.best_epoch,
            "initial_loss": self.initial_loss,
            "history": [list(h) for h in self.train_history],
        }

    @classmethod
    def from_dict(cls, d) -> "TrainedModel":
        if d.get("format") != FORMAT:
            raise InputError(f"unsupported model format {d.get('format')!r}; expected {FORMAT}")
        spec = CircuitSpec(d["topology"], d["n_qubits"], d["n_layers"])

        def arr(key):
            v = d.get(key)
            return None if v is None else np.array(v, dtype=float).reshape(spec.shape)

        return cls(
            spec=spec,
            theta_star=arr("theta_star"),
            seed=int(d["seed"]),
            train_history=[tuple(h) for h in d.get("history", [])],
            initial_loss=float(d.get("initial_loss", float("nan"))),
            theta_final=arr("theta_final"),
            theta_best=arr("theta_best"),
            best_epoch=int(d.get("best_epoch", -1)),
            arm=int(d.get("arm", 0)),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def predict_proba(spec: CircuitSpec, theta, X) -> np.ndarray:
    """Class-1 probabilities ``(1 - <Z_0>) / 2`` for each row of ``X``."""
    z = z0_values(batch_states(spec, theta, X))[0]
    return np.clip((1.0 - z) / 2.0, 0.0, 1.0)


def predict_prob(model: TrainedModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.spec.n_qubits,):
        raise ShapeError(f"expected {model.spec.n_qubits} features, got shape {x.shape}")
    return float(predict_proba(model.spec, model.theta_star, x[None, :])[0])


def bce_loss(probs, labels) -> float:
    """Mean binary cross-entropy in nats, with probabilities clipped to [1e-10, 1 - 1e-10]."""
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape:
        raise ShapeError(f"probs {p.shape} and labels {y.shape} differ in shape")
    p = np.clip(p, CLIP, 1 - CLIP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def _check_differentiable(spec):
    for op in spec.program():
        if op[0] == "rot" and op[1] not in ("x", "y", "z"):
            raise UnsupportedGateError(f"parameter-shift needs Pauli rotations, found axis {op[1]!r}")
        if op[0] not in ("rot", "cnot"):
            raise UnsupportedGateError(f"gate {op[0]!r} has no parameter-shift rule")


def shifted_thetas(theta, shift: float = SHIFT) -> np.ndarray:
    """Stack ``[theta, theta + s e_0, theta - s e_0, theta + s e_1, ...]`` row-wise."""
    flat = np.asarray(theta, dtype=float).reshape(-1)
    p = flat.size
    out = np.repeat(flat[None, :], 1 + 2 * p, axis=0)
    idx = np.arange(p)
    out[1 + 2 * idx, idx] += shift
    out[2 + 2 * idx, idx] -= shift
    return out


def z0_and_gradient(spec: CircuitSpec, theta, X):
    """<Z_0> per sample and its parameter-shift Jacobian ``(samples, n_params)``."""
    _check_differentiable(spec)
    z = z0_values(batch_states(spec, shifted_thetas(theta), X))  # (1 + 2P, B)
    jac = (z[1::2] - z[2::2]).T / 2.0
    return z[0], jac


def loss_and_gradient(spec: CircuitSpec, theta, X, y):
    """BCE loss on ``(X, y)`` and its gradient with respect to ``theta`` (shape of ``theta``)."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    z, jac = z0_and_gradient(spec, theta, X)
    p_raw = (1.0 - z) / 2.0
    p = np.clip(p_raw, CLIP, 1 - CLIP)
    loss = float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
    # the clip has zero derivative where it is active
    active = (p_raw > CLIP) & (p_raw < 1 - CLIP)
    dl_dp = np.where(active, (p - y) / (p * (1 - p)), 0.0) / len(y)
    dl_dz = -0.5 * dl_dp
    return loss, (dl_dz @ jac).reshape(theta.shape)


def parameter_shift_gradient(model, batch):
    """Gradient of the batch BCE loss.

    ``model`` is a :class:`TrainedModel` or a ``(spec, theta)`` pair and
    ``batch`` is ``(X, y)``.
    """
    spec, theta = (model.spec, model.theta_star) if isinstance(model, TrainedModel) else model
    X, y = batch
    return loss_and_gradient(spec, theta, X, y)[1]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, theta):
        return cls(np.zeros_like(theta, dtype=float), np.zeros_like(theta, dtype=float), 0)


def adam_step(theta, grad, state: AdamState, lr=0.005, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update. Returns ``(new_theta, new_state)``."""
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape or state.m.shape != theta.shape:
        raise ShapeError(f"theta {theta.shape}, grad {grad.shape} and moments {state.m.shape} must match")
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grad
    v = beta2 * state.v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    return theta - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


def init_theta(spec: CircuitSpec, seed: int, arm: int = 0, std: float = 0.01) -> np.ndarray:
    return rngs.stream(seed, "init", arm).normal(0.0, std, size=spec.shape)


def validation_indices(labels, fraction: float, seed: int, arm: int = 0):
    """Stratified (train, validation) index split inside a training portion."""
    labels = np.asarray(labels)
    gen = rngs.stream(seed, "validation", arm)
    val = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        k = math.floor(fraction * len(members) + 0.5)
        val.extend(gen.permutation(members)[:k])
    val = np.sort(np.array(val, dtype=int))
    return np.setdiff1d(np.arange(len(labels)), val), val


def train(spec: CircuitSpec, X, y, seed: int, config: TrainConfig = TrainConfig(), arm: int = 0) -> TrainedModel:
    """Minibatch Adam on the BCE loss, from a fresh N(0, std^2) initialization.

    ``X`` must already be preprocessed to ``spec.n_qubits`` columns. A
    stratified validation subset is held out of ``(X, y)``; its loss is
    recorded each epoch but never used for updates.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.n_qubits or len(X) != len(y):
        raise ShapeError(f"training data {X.shape} / {y.shape} do not fit a {spec.n_qubits}-qubit model")
    fit_idx, val_idx = validation_indices(y, config.validation_fraction, seed, arm)
    Xf, yf = X[fit_idx], y[fit_idx]
    Xv, yv = X[val_idx], y[val_idx]

    theta = init_theta(spec, seed, arm, config.init_std)
    state = AdamState.zeros_like(theta)
    shuffler = rngs.stream(seed, "shuffle", arm)

    def full_loss(th, A, b):
        return bce_loss(predict_proba(spec, th, A), b) if len(b) else float("nan")

    initial = full_loss(theta, Xf, yf)
    history = []
    best_loss, best_theta, best_epoch = math.inf, theta.copy(), -1
    for epoch in range(config.epochs):
        order = shuffler.permutation(len(yf))
        for start in range(0, len(order), config.batch_size):
            b = order[start : start + config.batch_size]
            _, grad = loss_and_gradient(spec, theta, Xf[b], yf[b])
            theta, state = adam_step(theta, grad, state, config.learning_rate, config.beta1, config.beta2, config.eps)
        tr, va = full_loss(theta, Xf, yf), full_loss(theta, Xv, yv)
        history.append((tr, va))
        score = va if len(yv) else tr
        if score < best_loss:
            best_loss, best_theta, best_epoch = score, theta.copy(), epoch
    if not np.all(np.isfinite(theta)):
        raise ArithmeticError("training produced non-finite parameters")
    return TrainedModel(
        spec=spec,
        theta_star=best_theta.copy() if config.use_best_epoch else theta.copy(),
        seed=int(seed),
        train_history=history,
        initial_loss=initial,
        theta_final=theta,
        theta_best=best_theta,
        best_epoch=best_epoch,
        arm=arm,
    )
