"""Discrete-event simulation of batch dispatch through a central microhub.

Orders appear as a spatio-temporal Poisson process over the square region.
Every order produces two visit nodes: its pickup (pending in the pickup
zone from the ready time) and its drop-off (pending in the drop-off zone
once the package has reached the hub).  A zone dispatches one of its idle
deliverers whenever it has at least ``n`` pending nodes; the ``n`` oldest
nodes form the batch and are toured from the hub.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .ca_model import DesignChoice, MarketScenario
from .errors import InvalidArgument, MicrohubError
from .geometry import DistanceMetric, Point, Region, distance_matrix, make_equal_partition
from .rng import STREAM_SIMULATOR, make_rng
from .tsp import DEFAULT_RESTARTS, heuristic_tour

PICKUP, DROPOFF = 0, 1

# same-time events resolve in this order, then by id
EV_ARRIVAL, EV_NODE, EV_TOUR_END = 0, 1, 2

TRACE_HEADER = ("time", "event_type", "order_id", "zone", "deliverer_id", "x", "y")


class SimulationLogicError(MicrohubError):
    """Internal bookkeeping was violated; indicates a simulator bug."""


@dataclass(frozen=True)
class SimConfig:
    scenario: MarketScenario
    design: DesignChoice
    horizon: float = 6.0
    warmup: float = 1.0
    seed: int = 0
    metric: DistanceMetric = DistanceMetric.EUCLIDEAN
    trace: bool = False
    tsp_restarts: int = DEFAULT_RESTARTS
    # explicit (t_ready, pickup_x, pickup_y, dropoff_x, dropoff_y) rows replace Poisson demand
    fixed_orders: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "metric", DistanceMetric.parse(self.metric))
        if not (0 <= self.warmup < self.horizon) or not math.isfinite(self.horizon):
            raise InvalidArgument(
                f"need 0 <= warmup < horizon, got warmup={self.warmup}, horizon={self.horizon}")
        m = self.scenario.fleet_m
        if int(m) != m:
            raise InvalidArgument(f"simulation needs an integer fleet size, got m={m}")
        if int(m) % self.design.K != 0:
            raise InvalidArgument(
                f"simulation needs K to divide m (m_k = m/K deliverers per zone); got m={int(m)}, K={self.design.K}")

    @property
    def m_k(self) -> int:
        return int(self.scenario.fleet_m) // self.design.K


@dataclass(frozen=True)
class OrderRecord:
    id: int
    pickup: Point
    dropoff: Point
    pickup_zone: int
    dropoff_zone: int
    t_ready: float
    t_dispatch_pickup: float = math.nan
    t_picked: float = math.nan
    t_at_hub: float = math.nan
    t_dispatch_dropoff: float = math.nan
    t_delivered: float = math.nan

    @property
    def completed(self) -> bool:
        return not math.isnan(self.t_delivered)

    def timestamps(self):
        return (self.t_ready, self.t_dispatch_pickup, self.t_picked,
                self.t_at_hub, self.t_dispatch_dropoff, self.t_delivered)


@dataclass
class SimResult:
    orders: list
    W_components: dict
    W_total_mean: float
    accumulation_wait: float
    queue_wait: float
    Q_total: float
    Q_per_vehicle: float
    zone_utilization: tuple
    generated: int
    completed: int
    in_flight: int
    measured: int
    tours: int
    window: tuple
    accumulation_wait_by_kind: dict = field(default_factory=dict)
    trace: list = field(default_factory=list, repr=False)

    @property
    def completed_orders(self):
        return [o for o in self.orders if o.completed]

    def summary(self) -> dict:
        return {
            "W_total_mean": self.W_total_mean,
            "W_components": dict(self.W_components),
            "accumulation_wait": self.accumulation_wait,
            "queue_wait": self.queue_wait,
            "accumulation_wait_by_kind": dict(self.accumulation_wait_by_kind),
            "Q_total": self.Q_total,
            "Q_per_vehicle": self.Q_per_vehicle,
            "zone_utilization": list(self.zone_utilization),
            "generated": self.generated,
            "completed": self.completed,
            "in_flight": self.in_flight,
            "measured": self.measured,
            "tours": self.tours,
            "window": list(self.window),
        }


def zone_pending_nodes(pending_zone) -> int:
    """Nodes waiting in one zone: ready pickups plus hub packages bound for it."""
    return len(pending_zone)


class _Engine:
    def __init__(self, cfg: SimConfig, check_invariants: bool):
        self.cfg = cfg
        self.check = check_invariants
        sc, design = cfg.scenario, cfg.design
        self.v = sc.speed_v
        self.n = design.n
        self.K = design.K
        self.region = Region(sc.area_A)
        self.partition = make_equal_partition(self.region, self.K)
        self.hub = np.array(self.region.hub, dtype=np.float64)

        if cfg.fixed_orders is not None:
            rows = np.asarray(cfg.fixed_orders, dtype=np.float64).reshape(-1, 5)
            rows = rows[np.argsort(rows[:, 0], kind="stable")]
            count = len(rows)
            self.t_ready = rows[:, 0].copy()
            self.pick_xy = rows[:, 1:3].copy()
            self.drop_xy = rows[:, 3:5].copy()
        else:
            order_rng = make_rng(cfg.seed, STREAM_SIMULATOR, 0)
            rate = sc.lambda_flux * sc.area_A
            count = order_rng.poisson(rate * cfg.horizon)
            self.t_ready = np.sort(order_rng.random(count) * cfg.horizon)
            self.pick_xy = order_rng.random((count, 2)) * self.region.side
            self.drop_xy = order_rng.random((count, 2)) * self.region.side
        self.pick_zone = self.partition.zones_of(self.pick_xy)
        self.drop_zone = self.partition.zones_of(self.drop_xy)
        self.tour_rng = make_rng(cfg.seed, STREAM_SIMULATOR, 1)

        nan = np.full(count, math.nan)
        self.t_dispatch_pickup = nan.copy()
        self.t_picked = nan.copy()
        self.t_at_hub = nan.copy()
        self.t_dispatch_dropoff = nan.copy()
        self.t_delivered = nan.copy()
        # per node: moment its batch had all n members present
        self.formed = {PICKUP: nan.copy(), DROPOFF: nan.copy()}

        self.pending = [[] for _ in range(self.K)]  # heaps of (ready, order_id, kind)
        m_k = cfg.m_k
        self.idle = [list(range(z * m_k, (z + 1) * m_k)) for z in range(self.K)]
        self.busy_time = np.zeros(self.K)
        self.events = []
        self.tour_spans = []
        self.trace = [] if cfg.trace else None
        self.n_arrived = 0
        # state counters for the conservation check
        self.state = {"awaiting": 0, "pickup_tour": 0, "at_hub": 0, "dropoff_tour": 0, "delivered": 0}

        for i, t in enumerate(self.t_ready):
            heapq.heappush(self.events, (float(t), EV_ARRIVAL, i, None))

    def log(self, t, kind, order_id, zone, deliverer, xy):
        if self.trace is not None:
            self.trace.append((t, kind, order_id, zone, deliverer,
                               None if xy is None else float(xy[0]),
                               None if xy is None else float(xy[1])))

    def run(self):
        horizon = self.cfg.horizon
        tour_id = 0
        while self.events and self.events[0][0] <= horizon:
            t, kind, ident, payload = heapq.heappop(self.events)
            if kind == EV_ARRIVAL:
                i = ident
                z = int(self.pick_zone[i])
                self.n_arrived += 1
                self.state["awaiting"] += 1
                heapq.heappush(self.pending[z], (t, i, PICKUP))
                self.log(t, "arrival", i, z, None, self.pick_xy[i])
                tour_id = self.try_dispatch(z, t, tour_id)
            elif kind == EV_NODE:
                node_kind, zone, deliverer = payload
                if node_kind == PICKUP:
                    self.t_picked[ident] = t
                    self.log(t, "pickup", ident, zone, deliverer, self.pick_xy[ident])
                else:
                    self.t_delivered[ident] = t
                    self.state["dropoff_tour"] -= 1
                    self.state["delivered"] += 1
                    self.log(t, "dropoff", ident, zone, deliverer, self.drop_xy[ident])
            else:
                zone, deliverer, picked = payload
                heapq.heappush(self.idle[zone], deliverer)
                self.log(t, "tour_end", None, zone, deliverer, self.hub)
                touched = {zone}
                for i in sorted(picked):
                    self.t_at_hub[i] = t
                    dz = int(self.drop_zone[i])
                    heapq.heappush(self.pending[dz], (t, i, DROPOFF))
                    touched.add(dz)
                    self.state["pickup_tour"] -= 1
                    self.state["at_hub"] += 1
                    self.log(t, "hub_arrival", i, dz, deliverer, self.hub)
                for z in sorted(touched):
                    tour_id = self.try_dispatch(z, t, tour_id)
            if self.check:
                self.check_state()
        return tour_id

    def try_dispatch(self, z, now, tour_id):
        while len(self.pending[z]) >= self.n and self.idle[z]:
            self.dispatch(z, now, tour_id)
            tour_id += 1
        return tour_id

    def dispatch(self, z, now, tour_id):
        if len(self.pending[z]) < self.n or not self.idle[z]:
            raise SimulationLogicError(f"dispatch in zone {z} without a full batch and an idle deliverer")
        deliverer = heapq.heappop(self.idle[z])
        batch = [heapq.heappop(self.pending[z]) for _ in range(self.n)]
        formed = max(b[0] for b in batch)
        xy = np.empty((self.n + 1, 2))
        xy[0] = self.hub
        for j, (_, i, kind) in enumerate(batch):
            xy[j + 1] = self.pick_xy[i] if kind == PICKUP else self.drop_xy[i]
            self.formed[kind][i] = formed
            if kind == PICKUP:
                self.t_dispatch_pickup[i] = now
                self.state["awaiting"] -= 1
                self.state["pickup_tour"] += 1
            else:
                self.t_dispatch_dropoff[i] = now
                self.state["at_hub"] -= 1
                self.state["dropoff_tour"] += 1
        dist = np.ascontiguousarray(distance_matrix(xy, self.cfg.metric))
        tour, length = heuristic_tour(dist, self.tour_rng, self.cfg.tsp_restarts)
        self.log(now, "dispatch", None, z, deliverer, self.hub)

        elapsed = 0.0
        prev = 0
        picked = []
        for node in tour[1:]:
            node = int(node)
            elapsed += dist[prev, node]
            prev = node
            _, i, kind = batch[node - 1]
            heapq.heappush(self.events, (now + elapsed / self.v, EV_NODE, i, (kind, z, deliverer)))
            if kind == PICKUP:
                picked.append(i)
        end = now + length / self.v
        heapq.heappush(self.events, (end, EV_TOUR_END, tour_id, (z, deliverer, tuple(picked))))
        self.tour_spans.append((now, end, z))

    def check_state(self):
        s = self.state
        if sum(s.values()) != self.n_arrived or min(s.values()) < 0:
            raise SimulationLogicError(f"order conservation broken: {s} vs {self.n_arrived} arrived")
        pend_pick = sum(1 for q in self.pending for e in q if e[2] == PICKUP)
        pend_drop = sum(1 for q in self.pending for e in q if e[2] == DROPOFF)
        if pend_pick != s["awaiting"] or pend_drop != s["at_hub"]:
            raise SimulationLogicError("pending queues disagree with order state counters")


def _mean(x) -> float:
    return float(np.mean(x)) if len(x) else math.nan


def run_simulation(config: SimConfig, check_invariants: bool = False) -> SimResult:
    """Simulate one seeded run over ``[0, horizon]``.

    Waiting statistics cover orders that become ready after ``warmup`` and
    are delivered by ``horizon``; vehicle miles are the tour miles driven
    inside ``(warmup, horizon]``.
    """
    eng = _Engine(config, check_invariants)
    n_tours = eng.run()
    cfg = config
    w0, w1 = cfg.warmup, cfg.horizon
    span = w1 - w0

    orders = []
    for i in range(len(eng.t_ready)):
        orders.append(OrderRecord(
            id=i,
            pickup=Point(float(eng.pick_xy[i, 0]), float(eng.pick_xy[i, 1])),
            dropoff=Point(float(eng.drop_xy[i, 0]), float(eng.drop_xy[i, 1])),
            pickup_zone=int(eng.pick_zone[i]), dropoff_zone=int(eng.drop_zone[i]),
            t_ready=float(eng.t_ready[i]),
            t_dispatch_pickup=float(eng.t_dispatch_pickup[i]), t_picked=float(eng.t_picked[i]),
            t_at_hub=float(eng.t_at_hub[i]), t_dispatch_dropoff=float(eng.t_dispatch_dropoff[i]),
            t_delivered=float(eng.t_delivered[i]),
        ))

    done = ~np.isnan(eng.t_delivered)
    meas = done & (eng.t_ready > w0)
    comps = {
        "pickup_wait": _mean((eng.t_dispatch_pickup - eng.t_ready)[meas]),
        "pickup_cycle": _mean((eng.t_at_hub - eng.t_dispatch_pickup)[meas]),
        "transfer_wait": _mean((eng.t_dispatch_dropoff - eng.t_at_hub)[meas]),
        "dropoff_time": _mean((eng.t_delivered - eng.t_dispatch_dropoff)[meas]),
    }

    # node-level accumulation / queue split, for nodes that became pending in the window
    acc, que, acc_kind = [], [], {}
    for kind, ready, disp in ((PICKUP, eng.t_ready, eng.t_dispatch_pickup),
                              (DROPOFF, eng.t_at_hub, eng.t_dispatch_dropoff)):
        formed = eng.formed[kind]
        sel = ~np.isnan(disp) & (ready > w0)
        a = (formed - ready)[sel]
        acc.append(a)
        que.append((disp - formed)[sel])
        acc_kind["pickup" if kind == PICKUP else "dropoff"] = _mean(a)
    acc = np.concatenate(acc)
    que = np.concatenate(que)

    miles = 0.0
    busy = np.zeros(cfg.design.K)
    for t0, t1, z in eng.tour_spans:
        overlap = max(0.0, min(t1, w1) - max(t0, w0))
        miles += overlap * eng.v
        busy[z] += overlap
    Q_total = miles / span
    util = busy / (cfg.m_k * span)

    generated = len(eng.t_ready)
    completed = int(done.sum())
    return SimResult(
        orders=orders, W_components=comps,
        W_total_mean=_mean((eng.t_delivered - eng.t_ready)[meas]),
        accumulation_wait=_mean(acc), queue_wait=_mean(que),
        Q_total=Q_total, Q_per_vehicle=Q_total / cfg.scenario.fleet_m,
        zone_utilization=tuple(float(u) for u in util),
        generated=generated, completed=completed, in_flight=generated - completed,
        measured=int(meas.sum()), tours=n_tours, window=(w0, w1),
        accumulation_wait_by_kind=acc_kind,
        trace=eng.trace or [],
    )


def write_trace_csv(result: SimResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for row in result.trace:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
