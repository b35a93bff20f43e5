"""Minimal neural substrate: dense and GRU Q-networks with analytic gradients.

Everything is float64 numpy so gradient checks are reproducible. Forward
passes accept a single input vector or a batch (leading axis); gradients are
summed over the batch.

GRU convention (reset gate applied to the hidden state inside the candidate):

    z  = sigmoid(Wz x + Uz h + bz)
    r  = sigmoid(Wr x + Ur h + br)
    hc = tanh(Wh x + Uh (r * h) + bh)
    h' = (1 - z) * h + z * hc
    q  = Wo h' + bo
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

Params = dict[str, np.ndarray]

CHECKPOINT_VERSION = 1


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


# Initial Q-values must start near zero: with a single network generating its
# own bootstrap targets, a loud random output layer carves strong arbitrary
# argmax basins that greedy data collection then never escapes.
OUTPUT_INIT_SCALE = 0.01


def _uniform_init(rng: np.random.Generator, out_dim: int, in_dim: int,
                  scale: float = 1.0) -> np.ndarray:
    bound = scale / np.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


def _orthogonal_init(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q


class DenseQNetwork:
    """Input -> ReLU hidden layer -> linear Q-values, one per action."""

    kind = "dense"

    def __init__(self, input_dim: int, hidden_dim: int = 48, n_actions: int = 4,
                 rng: np.random.Generator | None = None):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.n_actions = n_actions
        rng = rng or np.random.default_rng()
        self.params: Params = {
            "w1": _uniform_init(rng, hidden_dim, input_dim),
            "b1": np.zeros(hidden_dim),
            "w2": _uniform_init(rng, n_actions, hidden_dim, OUTPUT_INIT_SCALE),
            "b2": np.zeros(n_actions),
        }

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        P = self.params
        if x.ndim == 1:  # single sample, matvec path (hot during acting)
            if x.shape[0] != self.input_dim:
                raise ValueError(f"expected input dim {self.input_dim}, got {x.shape[0]}")
            pre = P["w1"] @ x + P["b1"]
            hidden = np.maximum(pre, 0.0)
            q = P["w2"] @ hidden + P["b2"]
            return q, {"x": x, "pre": pre, "hidden": hidden, "squeeze": True}
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected input dim {self.input_dim}, got {x.shape[1]}")
        pre = x @ P["w1"].T + P["b1"]
        hidden = np.maximum(pre, 0.0)
        q = hidden @ P["w2"].T + P["b2"]
        return q, {"x": x, "pre": pre, "hidden": hidden, "squeeze": False}

    def backward(self, cache: dict, dq: np.ndarray) -> Params:
        dq = np.asarray(dq, dtype=np.float64)
        hidden, x = cache["hidden"], cache["x"]
        if cache["squeeze"]:
            d_hidden = dq @ self.params["w2"]
            d_pre = d_hidden * (cache["pre"] > 0.0)
            return {
                "w2": np.outer(dq, hidden),
                "b2": dq.copy(),
                "w1": np.outer(d_pre, x),
                "b1": d_pre,
            }
        d_hidden = dq @ self.params["w2"]
        d_pre = d_hidden * (cache["pre"] > 0.0)
        return {
            "w2": dq.T @ hidden,
            "b2": dq.sum(axis=0),
            "w1": d_pre.T @ x,
            "b1": d_pre.sum(axis=0),
        }

    def architecture(self) -> dict:
        return {"kind": self.kind, "input_dim": self.input_dim,
                "hidden_dim": self.hidden_dim, "n_actions": self.n_actions}


class GruQNetwork:
    """Single GRU cell followed by a linear readout to Q-values."""

    kind = "gru"

    def __init__(self, input_dim: int, hidden_dim: int = 128, n_actions: int = 4,
                 rng: np.random.Generator | None = None):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.n_actions = n_actions
        rng = rng or np.random.default_rng()
        # Orthogonal recurrence keeps the hidden dynamics well-conditioned,
        # which the stale-state trace-1 training needs to get off the ground.
        self.params: Params = {}
        for gate in ("z", "r", "h"):
            self.params[f"w{gate}"] = _uniform_init(rng, hidden_dim, input_dim)
            self.params[f"u{gate}"] = _orthogonal_init(rng, hidden_dim)
            self.params[f"b{gate}"] = np.zeros(hidden_dim)
        self.params["wo"] = _uniform_init(rng, n_actions, hidden_dim, OUTPUT_INIT_SCALE)
        self.params["bo"] = np.zeros(n_actions)

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.hidden_dim)

    def forward(self, x: np.ndarray, h_prev: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
        P = self.params
        if x.ndim == 1:  # single step, matvec path (hot during acting)
            if x.shape[0] != self.input_dim or h_prev.shape != (self.hidden_dim,):
                raise ValueError(
                    f"expected input dim {self.input_dim} and hidden dim {self.hidden_dim}, "
                    f"got {x.shape} and {h_prev.shape}"
                )
            z = _sigmoid(P["wz"] @ x + P["uz"] @ h_prev + P["bz"])
            r = _sigmoid(P["wr"] @ x + P["ur"] @ h_prev + P["br"])
            rh = r * h_prev
            hc = np.tanh(P["wh"] @ x + P["uh"] @ rh + P["bh"])
            h_next = (1.0 - z) * h_prev + z * hc
            q = P["wo"] @ h_next + P["bo"]
            cache = {"x": x, "h": h_prev, "z": z, "r": r, "rh": rh, "hc": hc,
                     "h_next": h_next, "squeeze": True}
            return q, h_next, cache
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected input dim {self.input_dim}, got {x.shape[1]}")
        if h_prev.shape != (x.shape[0], self.hidden_dim):
            raise ValueError(
                f"hidden state shape {h_prev.shape} does not match batch {x.shape[0]}x{self.hidden_dim}"
            )
        z = _sigmoid(x @ P["wz"].T + h_prev @ P["uz"].T + P["bz"])
        r = _sigmoid(x @ P["wr"].T + h_prev @ P["ur"].T + P["br"])
        rh = r * h_prev
        hc = np.tanh(x @ P["wh"].T + rh @ P["uh"].T + P["bh"])
        h_next = (1.0 - z) * h_prev + z * hc
        q = h_next @ P["wo"].T + P["bo"]
        cache = {"x": x, "h": h_prev, "z": z, "r": r, "rh": rh, "hc": hc,
                 "h_next": h_next, "squeeze": False}
        return q, h_next, cache

    def backward(self, cache: dict, dq: np.ndarray) -> tuple[Params, np.ndarray]:
        dq = np.asarray(dq, dtype=np.float64)
        P = self.params
        x, h, z, r, rh, hc, h_next = (
            cache["x"], cache["h"], cache["z"], cache["r"], cache["rh"],
            cache["hc"], cache["h_next"],
        )
        dh_next = dq @ P["wo"]
        dz = dh_next * (hc - h)
        daz = dz * z * (1.0 - z)
        dhc = dh_next * z
        dah = dhc * (1.0 - hc * hc)
        drh = dah @ P["uh"]
        dr = drh * h
        dar = dr * r * (1.0 - r)
        if cache["squeeze"]:
            grads: Params = {
                "wo": np.outer(dq, h_next),
                "bo": dq.copy(),
                "wh": np.outer(dah, x),
                "uh": np.outer(dah, rh),
                "bh": dah,
                "wr": np.outer(dar, x),
                "ur": np.outer(dar, h),
                "br": dar,
                "wz": np.outer(daz, x),
                "uz": np.outer(daz, h),
                "bz": daz,
            }
        else:
            grads = {
                "wo": dq.T @ h_next,
                "bo": dq.sum(axis=0),
                "wh": dah.T @ x,
                "uh": dah.T @ rh,
                "bh": dah.sum(axis=0),
                "wr": dar.T @ x,
                "ur": dar.T @ h,
                "br": dar.sum(axis=0),
                "wz": daz.T @ x,
                "uz": daz.T @ h,
                "bz": daz.sum(axis=0),
            }
        dh_prev = dh_next * (1.0 - z) + drh * r + dar @ P["ur"] + daz @ P["uz"]
        return grads, dh_prev

    def architecture(self) -> dict:
        return {"kind": self.kind, "input_dim": self.input_dim,
                "hidden_dim": self.hidden_dim, "n_actions": self.n_actions}


def build_network(arch: dict, rng: np.random.Generator | None = None):
    kinds = {"dense": DenseQNetwork, "gru": GruQNetwork}
    spec = dict(arch)
    kind = spec.pop("kind")
    if kind not in kinds:
        raise ValueError(f"unknown network kind {kind!r}")
    return kinds[kind](rng=rng, **spec)


@dataclass
class Adam:
    """Adam with bias correction; ``step`` mutates the parameter arrays in place."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        self.t = 0
        self.m: Params = {}
        self.v: Params = {}

    def step(self, params: Params, grads: Params) -> None:
        if set(grads) != set(params):
            raise ValueError(f"gradient keys {sorted(grads)} do not match parameters {sorted(params)}")
        if not self.m:
            self.m = {k: np.zeros_like(v) for k, v in params.items()}
            self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for key, g in grads.items():
            if g.shape != params[key].shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {params[key].shape} for {key!r}")
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[key] -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


def finite_difference_check(params: Params, loss_fn, analytic: Params,
                            step: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    ``loss_fn`` takes no arguments and evaluates the loss at the current
    parameter values; entries of ``params`` are perturbed in place and
    restored.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    worst = 0.0
    for key, array in params.items():
        grad = analytic[key]
        flat = array.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            lo_hi = loss_fn()
            flat[i] = original - step
            lo_lo = loss_fn()
            flat[i] = original
            if not (np.isfinite(lo_hi) and np.isfinite(lo_lo)):
                raise FloatingPointError("non-finite loss during finite-difference check")
            numeric = (lo_hi - lo_lo) / (2.0 * step)
            a = grad.reshape(-1)[i]
            denom = max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, abs(a - numeric) / denom)
    return worst


def save_checkpoint(path: str | Path, network) -> None:
    """Write architecture descriptor plus parameter arrays; versioned."""
    arch = json.dumps(network.architecture(), sort_keys=True)
    np.savez(path, checkpoint_version=np.int64(CHECKPOINT_VERSION),
             architecture=np.bytes_(arch.encode()), **network.params)


def load_checkpoint(path: str | Path):
    """Rebuild a network from a checkpoint written by ``save_checkpoint``."""
    with np.load(path) as data:
        version = int(data["checkpoint_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        arch = json.loads(bytes(data["architecture"]).decode())
        network = build_network(arch)
        for key in network.params:
            if key not in data:
                raise ValueError(f"checkpoint missing parameter {key!r}")
            network.params[key] = np.array(data[key], dtype=np.float64)
    return network
