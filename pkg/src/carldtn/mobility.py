"""Node movement as piecewise-linear segments.

Every node is always on one segment ``(x0, y0, vx, vy, t0, t1)``; its
position at ``t0 <= t <= t1`` is ``(x0 + vx (t - t0), y0 + vy (t - t0))``.
Pauses are segments with zero velocity.  This keeps per-tick work to a
vectorised position evaluation; per-node Python only runs at segment ends.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import lru_cache

import networkx as nx
import numpy as np
from numba import njit

VARIANTS = ("rwp", "rwk", "graph", "static")
_EPS = 1e-9


class WaypointGraph:
    """Undirected road graph; vertices are points inside the world."""

    def __init__(self, points: dict[int, tuple[float, float]], edges: list[tuple[int, int]]):
        g = nx.Graph()
        for v, (x, y) in points.items():
            g.add_node(v, pos=(float(x), float(y)))
        for u, v in edges:
            (x1, y1), (x2, y2) = points[u], points[v]
            g.add_edge(u, v, weight=math.hypot(x2 - x1, y2 - y1))
        if g.number_of_nodes() == 0 or not nx.is_connected(g):
            raise ValueError("waypoint graph must be non-empty and connected")
        self.graph = g
        self.points = {v: (float(x), float(y)) for v, (x, y) in points.items()}
        self.vertices = sorted(points)
        self._path = lru_cache(maxsize=None)(self._shortest_path)

    def _shortest_path(self, u: int, v: int) -> tuple[int, ...]:
        return tuple(nx.dijkstra_path(self.graph, u, v))

    def path(self, u: int, v: int) -> tuple[int, ...]:
        return self._path(u, v)

    @classmethod
    def grid(cls, rows: int, cols: int, width: float, height: float) -> "WaypointGraph":
        """Manhattan grid spanning the world, one vertex per crossing."""
        if rows < 1 or cols < 1 or rows * cols < 2:
            raise ValueError("grid needs at least two vertices")
        dx = width / max(cols - 1, 1)
        dy = height / max(rows - 1, 1)
        pts = {r * cols + c: (c * dx, r * dy) for r in range(rows) for c in range(cols)}
        edges = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    edges.append((v, v + 1))
                if r + 1 < rows:
                    edges.append((v, v + cols))
        return cls(pts, edges)


@lru_cache(maxsize=32)
def grid_graph(spec: str, width: float, height: float) -> WaypointGraph:
    """Build a graph from a ``grid:RxC`` spec string."""
    kind, _, dims = spec.partition(":")
    if kind != "grid":
        raise ValueError(f"unknown graph spec {spec!r}")
    r, _, c = dims.partition("x")
    return WaypointGraph.grid(int(r), int(c), width, height)


@dataclass(frozen=True)
class MobilityModel:
    variant: str
    speed: tuple[float, float] = (0.5, 1.5)
    pause: tuple[float, float] = (0.0, 120.0)
    bounds: tuple[float, float] = (1000.0, 1000.0)
    leg: tuple[float, float] = (50.0, 250.0)
    graph: str = "grid:6x6"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown mobility variant {self.variant!r}")
        lo, hi = self.speed
        if self.variant != "static" and not (0 < lo <= hi):
            raise ValueError("speed range must be positive")
        if not (0 <= self.pause[0] <= self.pause[1]):
            raise ValueError("pause range must be non-negative")
        if not (self.bounds[0] > 0 and self.bounds[1] > 0):
            raise ValueError("world bounds must be positive")
        if self.variant == "rwk" and not (0 < self.leg[0] <= self.leg[1]):
            raise ValueError("leg range must be positive")

    def waypoint_graph(self) -> WaypointGraph:
        return grid_graph(self.graph, *self.bounds)


@dataclass
class MobilityState:
    x0: float
    y0: float
    vx: float = 0.0
    vy: float = 0.0
    t0: float = 0.0
    t1: float = 0.0
    now: float = 0.0
    moving: bool = False
    # random walk: direction of travel and distance left on the current leg
    heading: tuple[float, float] = (1.0, 0.0)
    leg_left: float = 0.0
    # waypoint graph: current/last vertex and remaining route
    vertex: int = -1
    route: list[int] = field(default_factory=list)
    speed: float = 0.0

    def position(self, t: float | None = None) -> tuple[float, float]:
        t = self.now if t is None else t
        dt = t - self.t0
        return (self.x0 + self.vx * dt, self.y0 + self.vy * dt)

    @property
    def pause_remaining(self) -> float:
        return 0.0 if self.moving else max(self.t1 - self.now, 0.0)

    def _start(self, x: float, y: float, vx: float, vy: float, t0: float, dur: float, moving: bool):
        self.x0, self.y0, self.vx, self.vy = x, y, vx, vy
        self.t0, self.t1 = t0, t0 + dur
        self.moving = moving


def initial_state(model: MobilityModel, rng: random.Random, start: float = 0.0,
                  position: tuple[float, float] | None = None) -> MobilityState:
    w, h = model.bounds
    if model.variant == "graph":
        g = model.waypoint_graph()
        v = g.vertices[rng.randrange(len(g.vertices))]
        x, y = g.points[v]
        st = MobilityState(x, y, t0=start, t1=start, now=start, vertex=v)
    else:
        if position is None:
            position = (rng.uniform(0.0, w), rng.uniform(0.0, h))
        x, y = position
        st = MobilityState(x, y, t0=start, t1=start, now=start)
    if model.variant == "static":
        st.t1 = math.inf
    return st


def _next_segment(st: MobilityState, model: MobilityModel, rng: random.Random) -> None:
    """Replace the finished segment with the next one, starting at ``st.t1``."""
    t = st.t1
    x, y = st.position(t)
    w, h = model.bounds
    x = min(max(x, 0.0), w)
    y = min(max(y, 0.0), h)
    v = model.variant
    if v == "static":
        st._start(x, y, 0.0, 0.0, t, math.inf, False)
        return
    if v == "rwp":
        if st.moving:
            st._start(x, y, 0.0, 0.0, t, rng.uniform(*model.pause), False)
            return
        tx, ty = rng.uniform(0.0, w), rng.uniform(0.0, h)
        speed = rng.uniform(*model.speed)
        dist = math.hypot(tx - x, ty - y)
        if dist < _EPS:
            st._start(tx, ty, 0.0, 0.0, t, 0.0, True)
            return
        dur = dist / speed
        st._start(x, y, (tx - x) / dur, (ty - y) / dur, t, dur, True)
        return
    if v == "rwk":
        if st.leg_left <= _EPS:
            if st.moving and model.pause[1] > 0.0:
                st.leg_left = 0.0
                st._start(x, y, 0.0, 0.0, t, rng.uniform(*model.pause), False)
                return
            theta = rng.uniform(0.0, 2.0 * math.pi)
            st.heading = (math.cos(theta), math.sin(theta))
            st.leg_left = rng.uniform(*model.leg)
            st.speed = rng.uniform(*model.speed)
        hx, hy = st.heading
        # distance to the first wall along the heading
        dists = []
        if hx > _EPS:
            dists.append((w - x) / hx)
        elif hx < -_EPS:
            dists.append(-x / hx)
        if hy > _EPS:
            dists.append((h - y) / hy)
        elif hy < -_EPS:
            dists.append(-y / hy)
        to_wall = min(dists) if dists else math.inf
        seg = min(st.leg_left, to_wall)
        if seg <= _EPS:
            # on a wall and heading out: reflect and retry from here
            if (x <= _EPS and hx < 0) or (x >= w - _EPS and hx > 0):
                hx = -hx
            if (y <= _EPS and hy < 0) or (y >= h - _EPS and hy > 0):
                hy = -hy
            st.heading = (hx, hy)
            st._start(x, y, 0.0, 0.0, t, 0.0, True)
            return
        dur = seg / st.speed
        st.leg_left -= seg
        st._start(x, y, hx * st.speed, hy * st.speed, t, dur, True)
        return
    # waypoint graph
    g = model.waypoint_graph()
    if not st.route:
        if st.moving:
            st._start(x, y, 0.0, 0.0, t, rng.uniform(*model.pause), False)
            return
        choices = [u for u in g.vertices if u != st.vertex]
        target = choices[rng.randrange(len(choices))]
        st.route = list(g.path(st.vertex, target)[1:])
        st.speed = rng.uniform(*model.speed)
    nxt = st.route.pop(0)
    nx_, ny_ = g.points[nxt]
    dist = math.hypot(nx_ - x, ny_ - y)
    st.vertex = nxt
    if dist < _EPS:
        st._start(nx_, ny_, 0.0, 0.0, t, 0.0, True)
        return
    dur = dist / st.speed
    st._start(x, y, (nx_ - x) / dur, (ny_ - y) / dur, t, dur, True)


def advance_to(st: MobilityState, t: float, model: MobilityModel, rng: random.Random) -> MobilityState:
    """Consume segments until the one covering time ``t``."""
    guard = 0
    while st.t1 <= t and st.t1 != math.inf:
        _next_segment(st, model, rng)
        guard += 1
        if guard > 100000:
            raise RuntimeError("mobility made no progress")
    st.now = t
    return st


def step_movement(st: MobilityState, dt: float, model: MobilityModel, rng: random.Random) -> MobilityState:
    """Advance one node by ``dt`` seconds.  ``dt <= 0`` leaves it unchanged."""
    if dt <= 0:
        return st
    return advance_to(st, st.now + dt, model, rng)


@njit(cache=True)
def _positions(seg, t, w, h):
    n = seg.shape[1]
    pos = np.empty((n, 2))
    for i in range(n):
        dt = t - seg[4, i]
        # float drift at segment ends must not leave the world
        pos[i, 0] = min(max(seg[0, i] + seg[2, i] * dt, 0.0), w[i])
        pos[i, 1] = min(max(seg[1, i] + seg[3, i] * dt, 0.0), h[i])
    return pos


class Fleet:
    """All nodes' movement, with vectorised position evaluation."""

    def __init__(self, models: list[MobilityModel], rngs: list[random.Random], start: float = 0.0,
                 states: list[MobilityState] | None = None):
        self.models = models
        self.rngs = rngs
        self.states = states if states is not None else [
            initial_state(m, r, start) for m, r in zip(models, rngs)
        ]
        n = len(self.states)
        self._w = np.array([m.bounds[0] for m in models])
        self._h = np.array([m.bounds[1] for m in models])
        self._seg = np.zeros((6, n))
        for i in range(n):
            self._sync(i)

    def _sync(self, i: int) -> None:
        s = self.states[i]
        self._seg[:, i] = (s.x0, s.y0, s.vx, s.vy, s.t0, s.t1)

    def advance(self, t: float) -> np.ndarray:
        """Move every node to time ``t``; return an ``(n, 2)`` position array."""
        seg = self._seg
        for i in np.flatnonzero(seg[5] <= t).tolist():
            advance_to(self.states[i], t, self.models[i], self.rngs[i])
            self._sync(i)
        return _positions(seg, float(t), self._w, self._h)
