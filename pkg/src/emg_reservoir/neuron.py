"""Adaptive leaky integrate-and-fire population on a fixed time step.

Both the membrane and the threshold relax exponentially (exact integrator, so a step of
any length matches the analytic solution). Within a step the order is leak, integrate,
fire. Synapses are instantaneous voltage jumps.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

TAU_RANGE_MS = (15.0, 25.0)


@dataclass(frozen=True)
class NeuronParams:
    """Adaptive LIF constants; ``tau_ms`` may be a scalar or one value per neuron."""

    v0: float = 0.0
    tau_ms: float | np.ndarray = 20.0
    refractory_ms: float = 1.0
    vth0: float = 1.0
    vthi: float = 0.1
    tau_vth_ms: float = 50.0

    def __post_init__(self) -> None:
        tau = np.asarray(self.tau_ms, dtype=np.float64)
        lo, hi = TAU_RANGE_MS
        if np.any(tau < lo) or np.any(tau > hi):
            raise ValueError(f"tau_ms must lie in [{lo}, {hi}]")
        if not self.vth0 > self.v0:
            raise ValueError("vth0 must exceed v0")
        if self.vthi < 0:
            raise ValueError("vthi must be nonnegative")
        if not self.tau_vth_ms > 0:
            raise ValueError("tau_vth_ms must be positive")
        if self.refractory_ms < 0:
            raise ValueError("refractory_ms must be nonnegative")


@dataclass(frozen=True, eq=False)
class NeuronState:
    v: np.ndarray
    vth: np.ndarray
    refr_until: np.ndarray
    t_now: float = 0.0

    @classmethod
    def rest(cls, n: int, params: NeuronParams) -> "NeuronState":
        return cls(
            v=np.full(n, params.v0, dtype=np.float64),
            vth=np.full(n, params.vth0, dtype=np.float64),
            refr_until=np.full(n, -np.inf),
            t_now=0.0,
        )

    @property
    def n(self) -> int:
        return self.v.size


def draw_population(n: int, template: NeuronParams | None = None, seed=None,
                    tau_range_ms: tuple[float, float] = TAU_RANGE_MS) -> NeuronParams:
    """Per-neuron parameters with tau drawn from Uniform[tau_range_ms]."""
    if n < 1:
        raise ValueError("n must be at least 1")
    template = template or NeuronParams()
    rng = np.random.default_rng(seed)
    tau = rng.uniform(tau_range_ms[0], tau_range_ms[1], size=n)
    return replace(template, tau_ms=tau)


def _advance(v, vth, refr_until, t_now, increment, p, dt_ms, decay_v, decay_th):
    # in place on v, vth, refr_until; returns the spike mask
    v -= p.v0
    v *= decay_v
    v += p.v0
    vth -= p.vth0
    vth *= decay_th
    vth += p.vth0
    # refractory lasts refractory_ms after the end of the spiking step
    active = refr_until <= t_now + 1e-9
    v += np.where(active, increment, 0.0)
    spiked = active & (v >= vth)
    if spiked.any():
        v[spiked] = p.v0
        vth[spiked] += p.vthi
        refr_until[spiked] = t_now + dt_ms + p.refractory_ms
    return spiked


def step(state: NeuronState, input_increment, params: NeuronParams,
         dt_ms: float = 1.0) -> tuple[NeuronState, np.ndarray]:
    """Advance ``state`` by one step; returns the new state and the spike mask."""
    if not dt_ms > 0:
        raise ValueError("dt_ms must be positive")
    inc = np.broadcast_to(np.asarray(input_increment, dtype=np.float64), state.v.shape)
    if not np.all(np.isfinite(inc)):
        raise ValueError("input increments must be finite")
    v, vth, ru = state.v.copy(), state.vth.copy(), state.refr_until.copy()
    decay_v = np.exp(-dt_ms / np.asarray(params.tau_ms, dtype=np.float64))
    decay_th = np.exp(-dt_ms / params.tau_vth_ms)
    spiked = _advance(v, vth, ru, state.t_now, inc, params, dt_ms, decay_v, decay_th)
    return NeuronState(v, vth, ru, state.t_now + dt_ms), spiked


class Population:
    """Mutable population used by the simulation engine (avoids per-step copies)."""

    def __init__(self, n: int, params: NeuronParams, dt_ms: float = 1.0):
        if not dt_ms > 0:
            raise ValueError("dt_ms must be positive")
        self.n = n
        self.params = params
        self.dt_ms = dt_ms
        tau = np.broadcast_to(np.asarray(params.tau_ms, dtype=np.float64), (n,))
        self._decay_v = np.exp(-dt_ms / tau)
        self._decay_th = np.exp(-dt_ms / params.tau_vth_ms)
        self.reset()

    def reset(self) -> None:
        s = NeuronState.rest(self.n, self.params)
        self.v, self.vth, self.refr_until = s.v, s.vth, s.refr_until
        self.step_index = 0

    @property
    def t_now(self) -> float:
        return self.step_index * self.dt_ms

    def state(self) -> NeuronState:
        return NeuronState(self.v.copy(), self.vth.copy(), self.refr_until.copy(), self.t_now)

    def step(self, increment: np.ndarray) -> np.ndarray:
        spiked = _advance(self.v, self.vth, self.refr_until, self.t_now, increment,
                          self.params, self.dt_ms, self._decay_v, self._decay_th)
        self.step_index += 1
        return spiked
