"""Parameter containers, SGD/Adam, finite-difference gradient checking and the
seeded RNG shared by every randomized code path."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
OPTIMIZERS = ("adam", "sgd")


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the same seed always yields the same stream."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


class ParamTensor:
    def __init__(self, name: str, values):
        self.name = name
        self.values = np.array(values, dtype=np.float64)
        self.grad = np.zeros_like(self.values)

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"ParamTensor({self.name!r}, shape={self.values.shape})"


@dataclass
class OptimizerState:
    kind: str
    lr: float
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.kind!r}; expected one of {OPTIMIZERS}")
        if not self.lr >= 0 or not np.isfinite(self.lr):
            raise ValueError(f"learning rate must be finite and >= 0, got {self.lr}")

    def to_arrays(self) -> dict:
        """Flat name -> array mapping (for npz checkpoints)."""
        out = {"step_count": np.array(self.step_count, dtype=np.int64), "lr": np.array(self.lr)}
        for k, a in self.m.items():
            out[f"m/{k}"] = a
        for k, a in self.v.items():
            out[f"v/{k}"] = a
        return out

    @classmethod
    def from_arrays(cls, kind: str, arrays: dict) -> "OptimizerState":
        state = cls(kind, float(arrays["lr"]), int(arrays["step_count"]))
        for key, a in arrays.items():
            if key.startswith("m/"):
                state.m[key[2:]] = np.array(a, dtype=np.float64)
            elif key.startswith("v/"):
                state.v[key[2:]] = np.array(a, dtype=np.float64)
        return state


def _check_grads(params: Sequence[ParamTensor]):
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise DivergenceError(
                f"non-finite gradient in {p.name}",
                diagnostics={"param": p.name, "max_abs_grad": float(np.nanmax(np.abs(p.grad)))},
            )


def sgd_step(params: Sequence[ParamTensor], state: OptimizerState):
    _check_grads(params)
    for p in params:
        p.values -= state.lr * p.grad
    state.step_count += 1


def adam_step(params: Sequence[ParamTensor], state: OptimizerState):
    _check_grads(params)
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t
    for p in params:
        m = state.m.setdefault(p.name, np.zeros_like(p.values))
        v = state.v.setdefault(p.name, np.zeros_like(p.values))
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * p.grad
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * p.grad * p.grad
        p.values -= state.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def step(params: Sequence[ParamTensor], state: OptimizerState):
    if state.kind == "adam":
        adam_step(params, state)
    else:
        sgd_step(params, state)


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    max_abs_error: float
    worst_param: str
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def grad_check(
    loss_fn: Callable[[], float],
    params: Sequence[ParamTensor],
    tol: float = 1e-4,
    h: float = 1e-4,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare each ``p.grad`` against central differences of ``loss_fn``.

    ``loss_fn`` is called with no arguments and must read the current
    parameter values. Relative error per entry is |a - n| / max(|a|, |n|, floor).
    The caller fills ``p.grad`` before the check; values are restored after.
    """
    worst = (0.0, 0.0, "")
    for p in params:
        analytic = p.grad.copy()
        flat = p.values.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            num = (up - down) / (2.0 * h)
            a = analytic.reshape(-1)[i]
            abs_err = abs(a - num)
            rel = abs_err / max(abs(a), abs(num), floor)
            if rel > worst[0]:
                worst = (rel, abs_err, p.name)
            elif worst[2] == "":
                worst = (worst[0], max(worst[1], abs_err), p.name)
    return GradCheckReport(worst[0], worst[1], worst[2], tol)
