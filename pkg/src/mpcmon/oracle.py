"""Plaintext reference monitors for the benchmark scenarios.

Each oracle implements the scenario's semantics directly on integers,
independently of the specification compiler and the VM, and serves as
the ground truth for differential testing: the distributed monitor's
flag sequence must match the oracle's exactly.
"""

from __future__ import annotations

from .errors import MonitorError


class AcsOracle:
    """Occupancy of type-A employees must never fall below type-B."""

    def __init__(self, doors: int):
        self.doors = doors
        self.ent_a = self.ex_a = self.ent_b = self.ex_b = 0

    def step(self, obs) -> int:
        for d in range(self.doors):
            ea, xa, eb, xb = obs[4 * d:4 * d + 4]
            self.ent_a += ea
            self.ex_a += xa
            self.ent_b += eb
            self.ex_b += xb
        in_a = self.ent_a - self.ex_a
        in_b = self.ent_b - self.ex_b
        return 1 if in_a < in_b else 0


class LocksOracle:
    """lock() or unlock() is never called twice in a row on any lock."""

    def __init__(self, locks: int):
        self.locked = [False] * locks

    def step(self, obs) -> int:
        flag = 0
        for j, was in enumerate(self.locked):
            is_lock, is_unlock = obs[2 * j], obs[2 * j + 1]
            if (is_lock and was) or (is_unlock and not was):
                flag = 1
            if is_lock:
                self.locked[j] = True
            elif is_unlock:
                self.locked[j] = False
        return flag


class CarOracle:
    """The position must stay inside the expanding sphere r(t)."""

    def __init__(self, dims: int, r_base: int, growth: int, r_max: int,
                 initial_position=None):
        self.pos = list(initial_position or [0] * dims)
        self.r_base = r_base
        self.growth = growth
        self.r_max = r_max
        self.t = 0

    def step(self, obs) -> int:
        self.t += 1
        for i in range(len(self.pos)):
            self.pos[i] += obs[2 * i] - obs[2 * i + 1]
        r = min(self.r_base + self.growth * self.t, self.r_max)
        norm = sum(p * p for p in self.pos)
        return 1 if norm > r * r else 0


class BloodSugarOracle:
    """Within any window of length in [a, b], readings stay <= threshold.

    The verdict for the window anchored at t-b is decided at time t: a
    violation is flagged iff some reading in the last b-a+1 steps
    (current included) exceeded the threshold.  Before t = b there is no
    complete window, so no violation is reported.
    """

    def __init__(self, window, threshold: int):
        self.a, self.b = window
        self.threshold = threshold
        self.exceeded = []
        self.t = 0

    def step(self, obs) -> int:
        self.t += 1
        self.exceeded.append(obs[0] > self.threshold)
        if self.t < self.b:
            return 0
        span = self.b - self.a + 1
        return 1 if any(self.exceeded[-span:]) else 0


def oracle_for(config) -> object:
    """Instantiate the reference monitor matching a ScenarioConfig."""
    name = config.name
    if name == "acs":
        return AcsOracle(config.size)
    if name == "locks":
        return LocksOracle(config.size)
    if name == "car":
        return CarOracle(config.size, config.bounds["r_base"], config.bounds["growth"],
                         config.bounds["r_max"],
                         list(config.bounds.get("initial_position", ())) or None)
    if name == "bloodsugar":
        return BloodSugarOracle(config.bounds["window"], config.bounds["threshold"])
    raise MonitorError(f"no oracle for scenario {name!r}")


def run_oracle(config, trace):
    """Flag sequence of the reference monitor over a whole trace."""
    mon = oracle_for(config)
    out = []
    for obs in trace:
        config.validate_obs(obs)
        out.append(mon.step(obs))
    return out
