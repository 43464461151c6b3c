"""The four case-study stochastic processes and their exact mode rules.

The published case studies leave the concrete dynamics open, so each
simulator here is the simplest process reproducing the qualitative
structure the pipeline needs: well-separated dynamical modes, rare modes
for Navigation, and one property-violating mode for the crossroad pair.
All constants live on the scenario dataclasses below.

Randomness discipline: every trajectory owns a dedicated RNG stream
derived from (seed, trajectory index), so serial and parallel generation
agree bit for bit and any single trajectory can be regenerated from its
recorded seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from ..rng import substream_seed
from ..trajectories import Trajectory, TrajectoryBatch

__all__ = [
    "Scenario",
    "SignalScenario",
    "NavigationScenario",
    "CrossroadScenario",
    "MultiAgentCrossroadScenario",
    "SCENARIOS",
    "get_scenario",
    "simulate_trajectories",
    "exact_mode",
]


@dataclass(frozen=True)
class Scenario:
    """Base: subclasses supply dynamics, mode rule and constants."""

    id: ClassVar[str]
    dim: ClassVar[int]
    horizon: ClassVar[int]
    mode_count: ClassVar[int]
    init_lo: ClassVar[tuple[float, ...]]  # uniform sampling box for s(0)
    init_hi: ClassVar[tuple[float, ...]]
    bounds_lo: ClassVar[tuple[float, ...]]  # admissible region for caller-given s(0)
    bounds_hi: ClassVar[tuple[float, ...]]
    properties: ClassVar[dict[str, str]]  # property id -> formula text
    default_property: ClassVar[str]

    noise_scale: float = 1.0  # global multiplier; 0 disables stochastic forcing

    def rollout_one(self, s0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def exact_mode_batch(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_init(self, s0: np.ndarray) -> np.ndarray:
        s0 = np.asarray(s0, dtype=np.float64)
        if s0.shape != (self.dim,):
            raise ValueError(f"{self.id} states have dimension {self.dim}, got shape {s0.shape}")
        lo, hi = np.asarray(self.bounds_lo), np.asarray(self.bounds_hi)
        if np.any(s0 < lo) or np.any(s0 > hi):
            raise ValueError(f"initial state {s0.tolist()} outside {self.id} bounds")
        return s0

    def sample_init(self, rng: np.random.Generator) -> np.ndarray:
        lo, hi = np.asarray(self.init_lo), np.asarray(self.init_hi)
        return lo + (hi - lo) * rng.random(self.dim)


def _steer(pos: np.ndarray, target: np.ndarray, speed: float) -> np.ndarray:
    d = target - pos
    dist = float(np.hypot(d[0], d[1]))
    if dist <= speed:
        return d
    return d * (speed / dist)


@dataclass(frozen=True)
class SignalScenario(Scenario):
    """1-D overdamped particle in a triple-well potential.

    Euler step s' = s + clip(-eta*V'(s), +-drift_cap) + sigma_k * xi with
    stable equilibria at 5, 12.5, 20 (barriers at 8.75, 16.25).  Initial
    states are drawn from the middle band, where early noise leaves all
    three basins reachable; the noise floor keeps late-time jitter small so
    basin choice settles early.  The property threshold 17.5 separates the
    top basin.
    """

    id: ClassVar[str] = "Signal"
    dim: ClassVar[int] = 1
    horizon: ClassVar[int] = 45
    mode_count: ClassVar[int] = 3
    init_lo: ClassVar[tuple[float, ...]] = (10.5,)
    init_hi: ClassVar[tuple[float, ...]] = (15.0,)
    bounds_lo: ClassVar[tuple[float, ...]] = (-5.0,)
    bounds_hi: ClassVar[tuple[float, ...]] = (30.0,)
    properties: ClassVar[dict[str, str]] = {"phi": "F[0,22]G[0,22](x0 > 17.5)"}
    default_property: ClassVar[str] = "phi"

    equilibria: ClassVar[tuple[float, ...]] = (5.0, 12.5, 20.0)

    eta: float = 0.12
    drift_cap: float = 1.2
    noise0: float = 2.5
    noise_decay: float = 0.85
    noise_floor: float = 0.25

    def _drift(self, s: float) -> float:
        v = (s - 5.0) * (s - 8.75) * (s - 12.5) * (s - 16.25) * (s - 20.0) / 1000.0
        return float(np.clip(-self.eta * v, -self.drift_cap, self.drift_cap))

    def rollout_one(self, s0, rng):
        out = np.empty((self.horizon, 1))
        out[0] = s0
        s = float(s0[0])
        for k in range(1, self.horizon):
            sigma = max(self.noise_floor, self.noise0 * self.noise_decay ** (k - 1))
            s = s + self._drift(s) + self.noise_scale * sigma * rng.normal()
            s = float(np.clip(s, self.bounds_lo[0], self.bounds_hi[0]))
            out[k, 0] = s
        return out

    def exact_mode_batch(self, states):
        terminal = states[:, -1, 0]
        gaps = np.abs(terminal[:, None] - np.asarray(self.equilibria)[None, :])
        return np.argmin(gaps, axis=1).astype(np.int64) + 1  # first min -> lowest index


@dataclass(frozen=True)
class NavigationScenario(Scenario):
    """Waypoint-following agent crossing one of four corridors in a room.

    Four square obstacles block the middle band of the room, leaving
    corridors centered at x = 7, 14, 21, 28.  A route (corridor) is drawn
    per trajectory with non-uniform probabilities, so two modes are rare.
    """

    id: ClassVar[str] = "Navigation"
    dim: ClassVar[int] = 2
    horizon: ClassVar[int] = 30
    mode_count: ClassVar[int] = 4
    init_lo: ClassVar[tuple[float, ...]] = (12.0, 2.0)
    init_hi: ClassVar[tuple[float, ...]] = (18.0, 4.0)
    bounds_lo: ClassVar[tuple[float, ...]] = (1.0, 1.0)
    bounds_hi: ClassVar[tuple[float, ...]] = (29.0, 29.0)
    properties: ClassVar[dict[str, str]] = {
        "phi": (
            "G[0,29](maxdist(x0,x1; 15.0,15.0) <= 14.0"
            " & maxdist(x0,x1; 3.5,15.0) >= 2.5"
            " & maxdist(x0,x1; 10.5,15.0) >= 2.5"
            " & maxdist(x0,x1; 17.5,15.0) >= 2.5"
            " & maxdist(x0,x1; 24.5,15.0) >= 2.5)"
        )
    }
    default_property: ClassVar[str] = "phi"

    corridor_x: ClassVar[tuple[float, ...]] = (7.0, 14.0, 21.0, 28.0)
    route_probs: ClassVar[tuple[float, ...]] = (0.1, 0.4, 0.4, 0.1)

    speed: float = 1.6
    wp_tol: float = 1.2
    sigma: float = 0.25

    def _route_waypoints(self, route: int) -> np.ndarray:
        cx = self.corridor_x[route]
        return np.array([[cx, 9.0], [cx, 21.0], [15.0, 27.0]])

    def rollout_one(self, s0, rng):
        cum = np.cumsum(self.route_probs)
        route = int(np.searchsorted(cum, rng.random(), side="right"))
        wps = self._route_waypoints(route)
        out = np.empty((self.horizon, 2))
        out[0] = s0
        pos = np.asarray(s0, dtype=np.float64).copy()
        wp_i = 0
        for k in range(1, self.horizon):
            if wp_i < len(wps) - 1 and np.hypot(*(wps[wp_i] - pos)) < self.wp_tol:
                wp_i += 1
            pos = pos + _steer(pos, wps[wp_i], self.speed)
            pos = pos + self.noise_scale * self.sigma * rng.normal(size=2)
            pos = np.clip(pos, self.bounds_lo, self.bounds_hi)
            out[k] = pos
        return out

    def exact_mode_batch(self, states):
        # corridor actually used: x at the step closest to the obstacle band
        t_star = np.argmin(np.abs(states[:, :, 1] - 15.0), axis=1)
        x_star = states[np.arange(states.shape[0]), t_star, 0]
        gaps = np.abs(x_star[:, None] - np.asarray(self.corridor_x)[None, :])
        return np.argmin(gaps, axis=1).astype(np.int64) + 1


def _crossroad_routes() -> tuple[np.ndarray, ...]:
    left = np.array([[25.0, 25.0], [3.0, 27.0]])
    straight = np.array([[25.0, 25.0], [25.0, 55.0]])
    right = np.array([[25.0, 23.0], [29.0, 21.0], [47.0, 21.0]])
    return left, straight, right


@dataclass(frozen=True)
class CrossroadScenario(Scenario):
    """Ego vehicle entering an intersection from the south; left, straight
    and right route templates drawn with equal probability.  A second car
    crosses deterministically from the east.  State = (ego x, ego y,
    car x, car y).  Turning right crosses the one-way boundary x = 37.
    """

    id: ClassVar[str] = "Crossroad"
    dim: ClassVar[int] = 4
    horizon: ClassVar[int] = 21
    mode_count: ClassVar[int] = 3
    init_lo: ClassVar[tuple[float, ...]] = (23.0, 0.0, 43.0, 27.0)
    init_hi: ClassVar[tuple[float, ...]] = (27.0, 4.0, 45.0, 28.0)
    bounds_lo: ClassVar[tuple[float, ...]] = (15.0, -5.0, 35.0, 20.0)
    bounds_hi: ClassVar[tuple[float, ...]] = (35.0, 10.0, 55.0, 35.0)
    properties: ClassVar[dict[str, str]] = {
        "phi_right": "G[0,20](x0 <= 37)",
        "phi_car": "G[0,20](dist(x0,x1; x2,x3) > 5)",
    }
    default_property: ClassVar[str] = "phi_car"

    car_velocity: ClassVar[tuple[float, float]] = (-1.2, 0.0)
    mode_left_max_x: ClassVar[float] = 18.0  # terminal ego x below -> left
    mode_right_min_x: ClassVar[float] = 32.0  # terminal ego x above -> right

    speed: float = 2.5
    wp_tol: float = 2.0
    sigma: float = 0.35

    def _ego_car_rollout(self, s0, rng, out):
        route = int(rng.integers(0, 3))
        wps = _crossroad_routes()[route]
        out[0, :4] = s0[:4]
        ego = np.asarray(s0[:2], dtype=np.float64).copy()
        car = np.asarray(s0[2:4], dtype=np.float64).copy()
        vel = np.asarray(self.car_velocity)
        wp_i = 0
        for k in range(1, self.horizon):
            if wp_i < len(wps) - 1 and np.hypot(*(wps[wp_i] - ego)) < self.wp_tol:
                wp_i += 1
            ego = ego + _steer(ego, wps[wp_i], self.speed)
            ego = ego + self.noise_scale * self.sigma * rng.normal(size=2)
            car = car + vel
            out[k, :2] = ego
            out[k, 2:4] = car

    def rollout_one(self, s0, rng):
        out = np.empty((self.horizon, self.dim))
        self._ego_car_rollout(s0, rng, out)
        return out

    def exact_mode_batch(self, states):
        terminal_x = states[:, -1, 0]
        modes = np.full(states.shape[0], 2, dtype=np.int64)  # straight
        modes[terminal_x < self.mode_left_max_x] = 1
        modes[terminal_x > self.mode_right_min_x] = 3
        return modes


@dataclass(frozen=True)
class MultiAgentCrossroadScenario(CrossroadScenario):
    """Crossroad plus a pedestrian north of the intersection who crosses
    westward with probability `cross_prob` (otherwise lingers).  State =
    (ego x, ego y, car x, car y, ped x, ped y).  The pedestrian state is
    hidden from observers during `occlusion_window` (inclusive step range);
    simulation and monitoring always use the true states.
    """

    id: ClassVar[str] = "MultiAgentCrossroad"
    dim: ClassVar[int] = 6
    horizon: ClassVar[int] = 21
    mode_count: ClassVar[int] = 3
    init_lo: ClassVar[tuple[float, ...]] = (23.0, 0.0, 43.0, 27.0, 32.2, 30.5)
    init_hi: ClassVar[tuple[float, ...]] = (27.0, 4.0, 45.0, 28.0, 33.8, 31.5)
    bounds_lo: ClassVar[tuple[float, ...]] = (15.0, -5.0, 35.0, 20.0, 25.0, 28.0)
    bounds_hi: ClassVar[tuple[float, ...]] = (35.0, 10.0, 55.0, 35.0, 40.0, 34.0)
    properties: ClassVar[dict[str, str]] = {
        "phi_right": "G[0,20](x0 <= 37)",
        "phi_car": "G[0,20](dist(x0,x1; x2,x3) > 5)",
        "phi_ped": "G[0,20](dist(x0,x1; x4,x5) > 5)",
        "phi_multi": (
            "G[0,20](dist(x0,x1; x4,x5) > 5)"
            " & G[0,20](dist(x0,x1; x2,x3) > 5)"
            " & G[0,20](x0 <= 37)"
        ),
    }
    default_property: ClassVar[str] = "phi_multi"

    occlusion_window: ClassVar[tuple[int, int]] = (4, 9)

    cross_prob: float = 0.35
    ped_speed: float = 0.85
    ped_stop_x: float = 16.0
    ped_sigma: float = 0.12

    def rollout_one(self, s0, rng):
        out = np.empty((self.horizon, self.dim))
        self._ego_car_rollout(s0, rng, out)
        crossing = rng.random() < self.cross_prob
        out[0, 4:6] = s0[4:6]
        ped = np.asarray(s0[4:6], dtype=np.float64).copy()
        for k in range(1, self.horizon):
            vx = -self.ped_speed if crossing and ped[0] > self.ped_stop_x else 0.0
            ped = ped + np.array([vx, 0.0]) + self.noise_scale * self.ped_sigma * rng.normal(size=2)
            out[k, 4:6] = ped
        return out

    def observation_mask(self) -> np.ndarray:
        """(H, dim) boolean: False where the state is hidden from observers."""
        mask = np.ones((self.horizon, self.dim), dtype=bool)
        a, b = self.occlusion_window
        mask[a : b + 1, 4:6] = False
        return mask


SCENARIOS: dict[str, Scenario] = {
    s.id: s
    for s in (
        SignalScenario(),
        NavigationScenario(),
        CrossroadScenario(),
        MultiAgentCrossroadScenario(),
    )
}


def get_scenario(scenario_id: str) -> Scenario:
    try:
        return SCENARIOS[scenario_id]
    except KeyError:
        known = ", ".join(sorted(SCENARIOS))
        raise KeyError(f"unknown scenario {scenario_id!r}; known: {known}") from None


def simulate_trajectories(
    scenario: Scenario, s0, count: int, seed: int
) -> TrajectoryBatch:
    """`count` rollouts from exactly s0; deterministic in (seed, s0, count)."""
    s0 = scenario.check_init(s0)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    seeds = np.array([substream_seed(seed, i) for i in range(count)], dtype=np.uint64)
    states = np.empty((count, scenario.horizon, scenario.dim))
    for i in range(count):
        states[i] = scenario.rollout_one(s0, np.random.default_rng(int(seeds[i])))
        states[i, 0] = s0  # exact, not merely close
    return TrajectoryBatch(states, seeds=seeds, modes=scenario.exact_mode_batch(states))


def exact_mode(scenario: Scenario, s: Trajectory | np.ndarray) -> int:
    """Rule-based mode label in {1..G} for one trajectory."""
    states = s.states if isinstance(s, Trajectory) else np.asarray(s, dtype=np.float64)
    if states.ndim != 2 or states.shape[1] != scenario.dim:
        raise ValueError(
            f"{scenario.id} trajectories have dimension {scenario.dim}, got shape {states.shape}"
        )
    return int(scenario.exact_mode_batch(states[None])[0])
