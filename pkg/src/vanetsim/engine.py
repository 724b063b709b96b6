"""Run orchestration: builds scenarios and executes one seeded run per
(protocol, density), producing a MetricsLedger."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dissemination as dis
from . import routing as rt
from .config import (CTD_PROTOCOLS, ROUTING_PROTOCOLS, ScenarioConfig, Frame,
                     expand_protocol, load_frame_trace, synthetic_frame_trace)
from .ctd import Alert, majority_confirms, passive_accept, reply_draw
from .metrics import MetricsLedger
from .radio import Channel, LinkQualityInputs, abe_estimate, atb_interval, lqf
from .roadnet import generate_grid, RoadGraph
from .simcore import RngStreams, SimEvent, Simulator

HELLO_SIZE = 64          # bytes
ALERT_SIZE = 200
REPLY_SIZE = 64
PROC_DELAY = 0.002       # per-hop forwarding latency beyond airtime, seconds
MAC_LOSS_MAX = 0.25      # intrinsic per-vehicle MAC loss upper bound
DATA_MAC_RETRIES = 3     # unicast attempts per data hop before giving up


@dataclass
class Message:
    id: str
    kind: str               # hello | warning | data | alert | ctd-query | ctd-reply
    origin: tuple[float, float]
    created: float
    size: int
    ttl: int
    hops: int = 0
    payload: object = None
    dest: object = None     # routing destination (point) or addressed node id
    ring: object = None
    perimeter: object = None


@dataclass
class Node:
    id: str
    kind: str               # vehicle | pedestrian | rsu
    static_pos: Optional[tuple[float, float]] = None
    mac_loss: float = 0.0
    neighbors: dict = field(default_factory=dict)
    seen: set = field(default_factory=set)
    msg_state: dict = field(default_factory=dict)
    weights: rt.MetricWeights = field(default_factory=rt.equal_weights)
    pending_nsf: list = field(default_factory=list)
    pending_scf: list = field(default_factory=list)


class PositionTable:
    """Grid-sampled positions of every node, vectorized lookup by time."""

    def __init__(self, trace, mobile_ids: list[str], static: dict[str, tuple[float, float]],
                 duration: float, dt: float):
        self.ids = list(mobile_ids) + sorted(static)
        self.index = {nid: i for i, nid in enumerate(self.ids)}
        self.t0 = 0.0
        self.dt = dt
        n_steps = int(math.ceil(duration / dt)) + 1
        self.times = np.arange(n_steps + 1) * dt
        n = len(self.ids)
        self.X = np.empty((len(self.times), n))
        self.Y = np.empty((len(self.times), n))
        self.V = np.zeros((len(self.times), n))
        for i, nid in enumerate(mobile_ids):
            for k, t in enumerate(self.times):
                tq = min(t, trace.span(nid)[1])
                (x, y), v = trace.position_at(nid, tq)
                self.X[k, i], self.Y[k, i], self.V[k, i] = x, y, v
        for nid in sorted(static):
            i = self.index[nid]
            self.X[:, i], self.Y[:, i] = static[nid]
        self.n_mobile = len(mobile_ids)

    def _bracket(self, t: float) -> tuple[int, float]:
        k = int(t / self.dt)
        k = max(0, min(k, len(self.times) - 2))
        frac = (t - self.times[k]) / self.dt
        return k, min(1.0, max(0.0, frac))

    def coords_at(self, t: float) -> np.ndarray:
        k, frac = self._bracket(t)
        x = self.X[k] + frac * (self.X[k + 1] - self.X[k])
        y = self.Y[k] + frac * (self.Y[k + 1] - self.Y[k])
        return np.column_stack((x, y))

    def pos(self, nid: str, t: float) -> tuple[float, float]:
        i = self.index[nid]
        k, frac = self._bracket(t)
        return (float(self.X[k, i] + frac * (self.X[k + 1, i] - self.X[k, i])),
                float(self.Y[k, i] + frac * (self.Y[k + 1, i] - self.Y[k, i])))

    def speed(self, nid: str, t: float) -> float:
        i = self.index[nid]
        k, _ = self._bracket(t)
        return float(self.V[k, i])

    def velocity(self, nid: str, t: float) -> tuple[float, float]:
        i = self.index[nid]
        k, _ = self._bracket(t)
        dt = self.dt
        vx = (self.X[k + 1, i] - self.X[k, i]) / dt
        vy = (self.Y[k + 1, i] - self.Y[k, i]) / dt
        return (vx, vy)


class Run:
    """Shared substrate for one seeded run."""

    def __init__(self, cfg: ScenarioConfig, density: float, protocol: str, seed: int):
        self.cfg = cfg
        self.density = density
        self.protocol = protocol
        self.seed = seed
        self.sim = Simulator()
        self.rngs = RngStreams(seed)
        self.ledger = MetricsLedger(rings=tuple(cfg.rings))
        self.msg_counter = 0

        pedestrians = cfg.pedestrian_count if protocol in CTD_PROTOCOLS else 0
        vehicle_density = 0.0 if protocol in CTD_PROTOCOLS else density
        self.graph, self.trace = generate_grid(
            cfg.area.width, cfg.area.height, cfg.area.block_size,
            vehicle_density, seed,
            duration=cfg.duration + 1.0, dt=cfg.mobility_dt,
            with_obstacles=cfg.obstacles, pedestrian_count=pedestrians)
        mobile_ids = sorted(self.trace.nodes)

        static: dict[str, tuple[float, float]] = {}
        if cfg.warning.origin is not None:
            self.origin = cfg.warning.origin
        else:
            # default to the junction nearest the area center so the source
            # sits on a street rather than inside a building block
            center = (cfg.area.width / 2.0, cfg.area.height / 2.0)
            iid, _ = self.graph.nearest_intersection(center)
            node = self.graph.intersections[iid]
            self.origin = (node.x, node.y)
        self.rsu_ids: list[str] = []
        if protocol in ROUTING_PROTOCOLS:
            for r, frac in enumerate(self._rsu_fractions(cfg.routing.rsu_count)):
                p = (frac[0] * cfg.area.width, frac[1] * cfg.area.height)
                iid, _ = self.graph.nearest_intersection(p)
                node = self.graph.intersections[iid]
                static[f"rsu{r}"] = (node.x, node.y)
                self.rsu_ids.append(f"rsu{r}")
        elif protocol not in CTD_PROTOCOLS:
            static["origin"] = self.origin

        self.positions = PositionTable(self.trace, mobile_ids, static,
                                       cfg.duration + 1.0, cfg.mobility_dt)
        self.channel = Channel(cfg.radio, self.rngs.get("radio-loss"),
                               self.graph if cfg.obstacles else None)
        mac_rng = self.rngs.get("scenario")
        self.nodes: dict[str, Node] = {}
        for nid in mobile_ids:
            kind = "pedestrian" if nid.startswith("ped") else "vehicle"
            loss = float(mac_rng.uniform(0.0, MAC_LOSS_MAX)) if kind == "vehicle" else 0.0
            self.nodes[nid] = Node(nid, kind, mac_loss=loss,
                                   weights=rt.equal_weights(cfg.routing.w_floor))
        for nid, pos in static.items():
            kind = "rsu" if nid.startswith("rsu") else "vehicle"
            self.nodes[nid] = Node(nid, kind, static_pos=pos)
        self.jitter_rng = self.rngs.get("jitter")
        self.game_rng = self.rngs.get("game-draw")
        self.assess_rng = self.rngs.get("assessment")
        self.neighbor_timeout = cfg.routing.hello_interval * cfg.routing.neighbor_timeout_factor

    @staticmethod
    def _rsu_fractions(count: int) -> list[tuple[float, float]]:
        spots = [(0.25, 0.25), (0.75, 0.75), (0.25, 0.75), (0.75, 0.25),
                 (0.5, 0.5), (0.5, 0.25), (0.5, 0.75), (0.25, 0.5), (0.75, 0.5)]
        return spots[:max(1, min(count, len(spots)))]

    # --- shared machinery ---------------------------------------------------

    def next_msg_id(self, prefix: str) -> str:
        self.msg_counter += 1
        return f"{prefix}{self.msg_counter}"

    def fresh_neighbors(self, node: Node, now: float) -> dict[str, rt.NeighborEntry]:
        out = {}
        stale = []
        for nid, entry in node.neighbors.items():
            if entry.fresh(now, self.neighbor_timeout):
                out[nid] = entry
            else:
                stale.append(nid)
        for nid in stale:
            del node.neighbors[nid]
        return out

    def broadcast(self, sender: str, msg: Message, on_delivery) -> None:
        """Send msg from sender now; on_delivery(receiver_id, msg, t) is called
        for every successful reception."""
        now = self.sim.now
        pos = self.positions.pos(sender, now)
        coords = self.positions.coords_at(now)
        positions = {}
        d = np.hypot(coords[:, 0] - pos[0], coords[:, 1] - pos[1])
        near = np.flatnonzero(d <= self.cfg.radio.r_max)
        for i in near:
            positions[self.positions.ids[i]] = (float(coords[i, 0]), float(coords[i, 1]))
        tx = self.channel.start_transmission(sender, pos, msg, msg.size, now, positions)
        self.ledger.count_message(msg.kind)

        def resolve(_event: SimEvent) -> None:
            delivered, _collided = self.channel.resolve(tx)
            self.ledger.collisions = self.channel.collision_events
            for receiver in delivered:
                node = self.nodes[receiver]
                if node.mac_loss > 0 and self.channel.loss_rng.random() < node.mac_loss:
                    continue
                on_delivery(receiver, msg, tx.end)

        self.sim.call_at(tx.end, resolve, kind="transmit-end")

    def busy(self, nid: str) -> float:
        return self.channel.busy_ratio(nid, self.sim.now)

    def make_hello(self, node: Node, now: float) -> Message:
        return Message(self.next_msg_id("h"), "hello",
                       self.positions.pos(node.id, now), now, HELLO_SIZE, 1,
                       payload=self.hello_payload(node, now))

    def hello_payload(self, node: Node, now: float) -> dict:
        pos = self.positions.pos(node.id, now)
        if node.static_pos is not None:
            speed, heading = 0.0, (0.0, 0.0)
        else:
            speed = self.positions.speed(node.id, now)
            heading = rt.heading_of(self.positions.velocity(node.id, now))
        fresh = sum(1 for e in node.neighbors.values()
                    if e.fresh(now, self.neighbor_timeout))
        range_km2 = math.pi * (self.cfg.radio.r_max / 1000.0) ** 2
        busy = self.busy(node.id)
        return {
            "position": pos,
            "speed": speed,
            "heading": heading,
            "density": fresh / range_km2 if range_km2 > 0 else 0.0,
            "abe": abe_estimate(busy, self.cfg.radio.bitrate),
            "mac_loss": node.mac_loss,
        }

    def on_hello(self, receiver: str, msg: Message, t: float, sender: str) -> None:
        node = self.nodes[receiver]
        p = msg.payload
        is_new = sender not in node.neighbors or \
            not node.neighbors[sender].fresh(t, self.neighbor_timeout)
        node.neighbors[sender] = rt.NeighborEntry(
            sender, p["position"], p["speed"], p["heading"],
            p["density"], p["abe"], p["mac_loss"], t)
        if is_new and node.pending_nsf:
            for entry in list(node.pending_nsf):
                msg_id, known = entry
                if sender not in known:
                    node.pending_nsf.remove(entry)
                    self.relay_now(node, msg_id)
        if node.pending_scf:
            for msg_id in list(node.pending_scf):
                node.pending_scf.remove(msg_id)
                self.relay_now(node, msg_id)

    def relay_now(self, node: Node, msg_id: str) -> None:
        state = node.msg_state.get(msg_id)
        if state is None or state.forwarded:
            return
        stored = getattr(state, "stored_msg", None)
        if stored is None or stored.ttl <= 0:
            return
        if self.sim.now > stored.created + self.cfg.warning.lifetime:
            return
        state.forwarded = True
        state.scf_buffered = False
        self.forward_warning(node.id, stored)

    def start_beacons(self, ids: Optional[list[str]] = None, atb: bool = False,
                      i_min: float = 0.1, i_max: float = 1.0) -> None:
        interval = self.cfg.routing.hello_interval
        for nid in sorted(ids if ids is not None else self.nodes):
            phase = float(self.jitter_rng.uniform(0.0, interval))
            self.sim.call_at(phase, self._make_beacon(nid, interval, atb, i_min, i_max),
                             kind="beacon")

    def _make_beacon(self, nid: str, interval: float, atb: bool,
                     i_min: float, i_max: float):
        def beacon(event: SimEvent) -> None:
            node = self.nodes[nid]
            now = self.sim.now
            self.on_beacon_tick(node, now)
            msg = self.make_hello(node, now)
            self.broadcast(nid, msg,
                           lambda r, m, t: self.on_hello(r, m, t, nid))
            if atb:
                nxt = atb_interval(self.busy(nid), i_min, i_max)
            else:
                nxt = interval
            if now + nxt <= self.cfg.duration:
                self.sim.call_at(now + nxt, beacon, kind="beacon")

        return beacon

    def on_beacon_tick(self, node: Node, now: float) -> None:
        """Hook: per-beacon protocol housekeeping (DSW weight refresh)."""
        if self.protocol == "3mrp-dsw" and node.kind == "vehicle":
            fresh = self.fresh_neighbors(node, now)
            if len(fresh) >= 2:
                pos = self.positions.pos(node.id, now)
                dest = self.closest_rsu_pos(pos)
                snaps = [rt.normalize_metrics(e, pos, dest,
                                              bitrate=self.cfg.radio.bitrate,
                                              density_ref=self.cfg.routing.density_ref)
                         for _nid, e in sorted(fresh.items())]
                node.weights = rt.dsw_update(snaps, node.weights,
                                             self.cfg.routing.dsw_lambda)
            else:
                node.weights = rt.equal_weights(self.cfg.routing.w_floor)

    def closest_rsu_pos(self, p: tuple[float, float]) -> tuple[float, float]:
        best, best_d = None, float("inf")
        for rid in self.rsu_ids:
            rp = self.nodes[rid].static_pos
            d = math.hypot(rp[0] - p[0], rp[1] - p[1])
            if d < best_d:
                best, best_d = rp, d
        return best

    # overridden by run families
    def forward_warning(self, sender: str, msg: Message) -> None:
        raise NotImplementedError


# --- dissemination runs -----------------------------------------------------

class DisseminationRun(Run):
    """Warning-frame broadcast from the accident origin under one of the
    suppression/relay protocols."""

    def __init__(self, cfg, density, protocol, seed):
        super().__init__(cfg, density, protocol, seed)
        self.frame_rings: dict[str, dict[str, float]] = {}
        self.vehicle_ids = sorted(n for n, node in self.nodes.items()
                                  if node.kind == "vehicle" and n != "origin")
        self.reached: set[str] = set()
        self._last_sender_pos: dict[tuple[str, str], tuple[float, float]] = {}

    def execute(self) -> MetricsLedger:
        cfg = self.cfg
        self.start_beacons()
        if cfg.warning.frame_trace:
            frames = load_frame_trace(cfg.warning.frame_trace)
        else:
            frames = synthetic_frame_trace(cfg.warning.duration,
                                           cfg.warning.frame_rate,
                                           cfg.warning.mean_bitrate)
        for frame in frames:
            t = cfg.warning.start_time + frame.index / cfg.warning.frame_rate
            if t > cfg.duration:
                break
            self.sim.call_at(t, lambda e, f=frame: self.emit_frame(f),
                             kind="transmit-start")
        self.sim.run_until(cfg.duration)
        self.ledger.extras["coverage"] = (
            len(self.reached & set(self.vehicle_ids)) / len(self.vehicle_ids)
            if self.vehicle_ids else 0.0)
        self.ledger.check_invariants()
        return self.ledger

    def emit_frame(self, frame: Frame) -> None:
        now = self.sim.now
        msg = Message(f"f{frame.index}", "warning", self.origin, now,
                      frame.size_bytes, self.cfg.warning.ttl,
                      payload=frame.frame_type)
        coords = self.positions.coords_at(now)
        rings = {}
        for nid in self.vehicle_ids:
            i = self.positions.index[nid]
            d = math.hypot(coords[i, 0] - self.origin[0], coords[i, 1] - self.origin[1])
            ring = self.ledger.ring_for(d)
            if ring is not None:
                rings[nid] = ring
                c = self.ledger.counters(ring)
                c.frames_sent += 1
                key = f"frames_{frame.frame_type}_sent"
                self.ledger.extras[key] = self.ledger.extras.get(key, 0) + 1
        self.frame_rings[msg.id] = rings
        self.broadcast("origin", msg, self.on_warning)
        if self.protocol == "timer-relay":
            # the source is a message holder too: keep re-announcing under the
            # same timer scheme so an initially empty neighborhood is not fatal
            node = self.nodes["origin"]
            state = dis.DisseminationState(first_heard=now)
            state.stored_msg = msg
            node.msg_state[msg.id] = state
            node.seen.add(msg.id)
            self._start_timer_relay(node, msg, now, state)

    def forward_warning(self, sender: str, msg: Message) -> None:
        copy = dataclasses.replace(msg, ttl=msg.ttl - 1, hops=msg.hops + 1)
        self.broadcast(sender, copy, self.on_warning)

    def on_warning(self, receiver: str, msg: Message, t: float) -> None:
        node = self.nodes[receiver]
        if node.kind != "vehicle":
            return
        state = node.msg_state.get(msg.id)
        if msg.id in node.seen:
            self.ledger.record_duplicate(t)
            if state is not None:
                state.times_heard += 1
            return
        node.seen.add(msg.id)
        self.reached.add(receiver)
        ring = self.frame_rings.get(msg.id, {}).get(receiver)
        if ring is not None:
            c = self.ledger.counters(ring)
            c.frames_delivered += 1
            c.packets_sent += 1
            c.packets_delivered += 1
            c.delay_sum += t - msg.created
            c.delay_count += 1
            ftype = msg.payload
            key = f"frames_{ftype}_delivered"
            self.ledger.extras[key] = self.ledger.extras.get(key, 0) + 1
        state = dis.DisseminationState(first_heard=t)
        state.stored_msg = msg
        node.msg_state[msg.id] = state
        if msg.ttl <= 0:
            return
        self.dispatch(node, msg, t, state)

    def dispatch(self, node: Node, msg: Message, t: float,
                 state: dis.DisseminationState) -> None:
        cfg = self.cfg
        protocol = self.protocol
        if protocol == "nsf":
            fresh = self.fresh_neighbors(node, t)
            node.pending_nsf.append((msg.id, frozenset(fresh)))
            self.ledger.scf_stores += 1
            return
        if protocol == "jsf":
            self._start_jsf(node, msg, t, state)
            return
        if protocol == "timer-relay":
            self._start_timer_relay(node, msg, t, state)
            return
        ctx = self.reception_context(node, msg, t)
        decision = dis.decide_forward(protocol, ctx, cfg.game, self.game_rng,
                                      alpha1=cfg.alpha1, alpha2=cfg.alpha2)
        if not decision.fg_converged:
            self.ledger.fg_nonconverged += 1
        if decision.action == "forward":
            state.forwarded = True
            delay = float(self.jitter_rng.uniform(0.0, cfg.jitter_max))
            self.sim.call_after(delay,
                                lambda e: self.forward_warning(node.id, msg),
                                kind="transmit-start")
        elif decision.action == "store":
            state.scf_buffered = True
            self.ledger.scf_stores += 1
            node.pending_scf.append(msg.id)
            self._schedule_scf_retry(node, msg)

    def _schedule_scf_retry(self, node: Node, msg: Message) -> None:
        def retry(_event: SimEvent) -> None:
            if msg.id not in node.pending_scf:
                return
            if self.sim.now > msg.created + self.cfg.warning.lifetime:
                node.pending_scf.remove(msg.id)
                return
            if self.fresh_neighbors(node, self.sim.now):
                node.pending_scf.remove(msg.id)
                self.relay_now(node, msg.id)
                return
            self.sim.call_after(self.cfg.routing.hello_interval, retry,
                                kind="timer-expiry")

        self.sim.call_after(self.cfg.routing.hello_interval, retry,
                            kind="timer-expiry")

    def _start_jsf(self, node: Node, msg: Message, t: float,
                   state: dis.DisseminationState) -> None:
        """Rebroadcast at every new junction until the message timer expires."""
        poll = self.cfg.timers.poll_interval
        rho = 10.0

        def tick(_event: SimEvent) -> None:
            now = self.sim.now
            if now > msg.created + self.cfg.warning.lifetime or now > self.cfg.duration:
                return
            pos = self.positions.pos(node.id, now)
            iid, d = self.graph.nearest_intersection(pos)
            if d <= rho and iid != state.last_relay_intersection:
                state.last_relay_intersection = iid
                self.forward_warning(node.id, dataclasses.replace(
                    msg, ttl=msg.ttl, hops=msg.hops))
            self.sim.call_after(poll, tick, kind="timer-expiry")

        self.sim.call_after(poll, tick, kind="timer-expiry")

    def _start_timer_relay(self, node: Node, msg: Message, t: float,
                           state: dis.DisseminationState) -> None:
        """Periodic retransmission under the configured timer scheme."""
        cfg = self.cfg
        scheme = cfg.timers.scheme
        v_max = 14.0
        state.timer_started = t
        state.last_tx = t

        def fire(_event: SimEvent) -> None:
            now = self.sim.now
            if now > msg.created + cfg.warning.lifetime or now > cfg.duration:
                return
            pos = self.positions.pos(node.id, now)
            at_int = self.graph.is_at_intersection(pos)
            v = min(self.positions.speed(node.id, now), v_max)
            if scheme == "map":
                elapsed = now - state.last_tx
                delay = dis.retransmission_delay(scheme, v, v_max, at_int,
                                                 cfg.timers, elapsed)
                if delay == 0.0:
                    state.last_tx = now
                    self.forward_warning(node.id, msg)
                    self.sim.call_after(cfg.timers.poll_interval, fire,
                                        kind="timer-expiry")
                else:
                    self.sim.call_after(delay, fire, kind="timer-expiry")
            else:
                state.last_tx = now
                self.forward_warning(node.id, msg)
                delay = dis.retransmission_delay(scheme, v, v_max, at_int, cfg.timers)
                self.sim.call_after(delay, fire, kind="timer-expiry")

        delay = dis.retransmission_delay(scheme, min(self.positions.speed(node.id, t), v_max),
                                         v_max, self.graph.is_at_intersection(
                                             self.positions.pos(node.id, t)),
                                         cfg.timers)
        if scheme == "map":
            delay = cfg.timers.poll_interval
        # random phase so holders that heard the same broadcast do not stay
        # lock-stepped (synchronized timers collide at every shared hearer)
        delay += float(self.jitter_rng.uniform(0.0, cfg.jitter_max))
        self.sim.call_after(delay, fire, kind="timer-expiry")

    def reception_context(self, node: Node, msg: Message, t: float) -> dis.ReceptionContext:
        cfg = self.cfg
        pos = self.positions.pos(node.id, t)
        # sender position at transmit start: use the message origin for frames
        # relayed along; d_sr is the distance to the hop sender, recovered from
        # the most recent transmission of this message that reached us
        sender_pos = self._last_sender_pos.get((node.id, msg.id), msg.origin)
        d_sr = min(cfg.radio.r_max,
                   math.hypot(pos[0] - sender_pos[0], pos[1] - sender_pos[1]))
        iid, d_rint = self.graph.nearest_intersection(pos)
        busy = self.busy(node.id)
        quality = lqf(LinkQualityInputs(
            signal=max(0.0, 1.0 - d_sr / cfg.radio.r_max),
            channel=1.0 - busy,
            collision_prob=self.channel.collision_prob(node.id, t)))
        fresh = self.fresh_neighbors(node, t)
        fresh_ex = {nid: e for nid, e in fresh.items()}
        abe_norm = 1.0 - busy
        avails = [dis.availability(d_sr, cfg.radio.r_max, abe_norm)]
        neighbor_d_rint = []
        for nid in sorted(fresh_ex):
            e = fresh_ex[nid]
            d_n = math.hypot(e.position[0] - sender_pos[0], e.position[1] - sender_pos[1])
            if d_n <= cfg.radio.r_max:
                avails.append(dis.availability(
                    d_n, cfg.radio.r_max,
                    min(1.0, e.advertised_abe / cfg.radio.bitrate)))
            neighbor_d_rint.append(self.graph.nearest_intersection(e.position)[1])
        return dis.ReceptionContext(
            d_sr=d_sr, d_rint=d_rint, r_max=cfg.radio.r_max, lqf=quality,
            n_candidates=len(fresh_ex), at_intersection=d_rint <= 10.0,
            intersection_id=iid, neighbor_d_rint=neighbor_d_rint,
            abe_norm=abe_norm, candidate_avails=avails)

    def broadcast(self, sender: str, msg: Message, on_delivery) -> None:
        if msg.kind == "warning":
            pos = self.positions.pos(sender, self.sim.now)

            def wrapped(receiver, m, t):
                self._last_sender_pos[(receiver, m.id)] = pos
                on_delivery(receiver, m, t)

            super().broadcast(sender, msg, wrapped)
        else:
            super().broadcast(sender, msg, on_delivery)


# --- routing runs -----------------------------------------------------------

class RoutingRun(Run):
    """Unicast video reporting toward the closest RSU under GPSR or the
    multimetric forwarder selection."""

    def __init__(self, cfg, density, protocol, seed):
        super().__init__(cfg, density, protocol, seed)
        self.vehicle_ids = sorted(n for n, node in self.nodes.items()
                                  if node.kind == "vehicle")

    def execute(self) -> MetricsLedger:
        cfg = self.cfg
        self.start_beacons()
        rng = self.rngs.get("scenario")
        n_src = min(cfg.routing.source_count, len(self.vehicle_ids))
        sources = sorted(rng.choice(self.vehicle_ids, size=n_src, replace=False).tolist())
        frames = synthetic_frame_trace(cfg.warning.duration, cfg.warning.frame_rate,
                                       cfg.warning.mean_bitrate)
        for src in sources:
            for frame in frames:
                t = cfg.warning.start_time + frame.index / cfg.warning.frame_rate
                if t > cfg.duration:
                    break
                self.sim.call_at(
                    t, lambda e, s=src, f=frame: self.emit_packet(s, f),
                    kind="transmit-start")
        self.sim.run_until(cfg.duration)
        sent = sum(c.packets_sent for c in self.ledger.per_ring.values())
        delivered = sum(c.packets_delivered for c in self.ledger.per_ring.values())
        self.ledger.extras["loss"] = 1.0 - delivered / sent if sent else 0.0
        self.ledger.check_invariants()
        return self.ledger

    def emit_packet(self, src: str, frame: Frame) -> None:
        now = self.sim.now
        pos = self.positions.pos(src, now)
        dest = self.closest_rsu_pos(pos)
        d0 = math.hypot(pos[0] - dest[0], pos[1] - dest[1])
        ring = self.ledger.ring_for(d0) or self.ledger.rings[-1]
        self.ledger.counters(ring).packets_sent += 1
        msg = Message(self.next_msg_id("p"), "data", pos, now, frame.size_bytes,
                      self.cfg.routing.ttl, dest=dest)
        msg.ring = ring
        msg.perimeter = None
        self.hop(src, msg)

    def hop(self, holder_id: str, msg: Message) -> None:
        now = self.sim.now
        node = self.nodes[holder_id]
        if node.kind == "rsu":
            c = self.ledger.counters(msg.ring)
            c.packets_delivered += 1
            c.delay_sum += now - msg.created
            c.delay_count += 1
            return
        if msg.ttl <= 0:
            return
        pos = self.positions.pos(holder_id, now)
        dest = msg.dest
        fresh = self.fresh_neighbors(node, now)
        if not fresh:
            return  # lost: no forwarding opportunity
        neighbor_pos = {nid: e.position for nid, e in fresh.items()}
        nxt = self.select_next_hop(node, pos, neighbor_pos, fresh, dest, msg)
        if nxt is None:
            return
        self.transmit(holder_id, nxt, msg, pos, now)

    def select_next_hop(self, node: Node, pos, neighbor_pos, fresh, dest,
                        msg: Message) -> Optional[str]:
        if msg.perimeter is not None:
            d_cur = math.hypot(pos[0] - dest[0], pos[1] - dest[1])
            if d_cur < msg.perimeter.entry_distance:
                msg.perimeter = None  # recovered: back to greedy
        if msg.perimeter is None:
            if self.protocol == "gpsr":
                nxt = rt.gpsr_greedy_next(pos, neighbor_pos, dest)
            else:
                d_cur = math.hypot(pos[0] - dest[0], pos[1] - dest[1])
                closer = {nid: e for nid, e in fresh.items()
                          if math.hypot(e.position[0] - dest[0],
                                        e.position[1] - dest[1]) < d_cur}
                if closer:
                    scores = {}
                    for nid, e in closer.items():
                        v = rt.normalize_metrics(
                            e, pos, dest, bitrate=self.cfg.radio.bitrate,
                            density_ref=self.cfg.routing.density_ref)
                        w = node.weights if self.protocol == "3mrp-dsw" \
                            else rt.equal_weights(self.cfg.routing.w_floor)
                        scores[nid] = rt.multimetric_score(v, w)
                    nxt = rt.select_forwarder(scores)
                else:
                    nxt = None
            if nxt is not None:
                return nxt
            d_cur = math.hypot(pos[0] - dest[0], pos[1] - dest[1])
            msg.perimeter = rt.PerimeterState(entry_point=pos, entry_distance=d_cur)
        try:
            nxt = rt.gpsr_perimeter_next(node.id, pos, neighbor_pos, dest, msg.perimeter)
        except rt.PerimeterDrop:
            return None
        return nxt

    def transmit(self, holder_id: str, nxt: str, msg: Message, pos, now) -> None:
        actual = self.positions.pos(nxt, now)
        d = math.hypot(actual[0] - pos[0], actual[1] - pos[1])
        self.ledger.count_message("data")
        if d > self.cfg.radio.r_max:
            return  # stale neighbor entry: transmission fails, packet lost
        rng = self.channel.loss_rng
        target = self.nodes[nxt]
        # unicast MAC retries: a transient per-attempt loss only sinks the
        # packet when every attempt fails; a stale pick (above) fails outright
        # because the chosen neighbor is genuinely out of range
        attempts = 0
        delivered_hop = False
        while attempts < DATA_MAC_RETRIES:
            attempts += 1
            if self.cfg.radio.per_link_loss > 0 and \
                    rng.random() < self.cfg.radio.per_link_loss:
                continue
            if target.mac_loss > 0 and rng.random() < target.mac_loss:
                continue
            delivered_hop = True
            break
        if not delivered_hop:
            return
        msg.ttl -= 1
        msg.hops += 1
        delay = attempts * (msg.size * 8.0 / self.cfg.radio.bitrate) + PROC_DELAY
        if msg.perimeter is not None:
            msg.perimeter.came_from = holder_id
        self.sim.call_after(delay, lambda e: self.hop(nxt, msg), kind="transmit-end")

    def forward_warning(self, sender: str, msg: Message) -> None:
        pass  # routing runs carry no broadcast warnings


# --- CTD runs ---------------------------------------------------------------

class CtdRun(Run):
    """Pedestrian alert assessment: query-based, passive, or plain flooding."""

    def __init__(self, cfg, density, protocol, seed):
        super().__init__(cfg, density, protocol, seed)
        self.device_ids = sorted(n for n, node in self.nodes.items()
                                 if node.kind == "pedestrian")
        self.reached: set[str] = set()
        self.alerts: dict[str, Alert] = {}

    def execute(self) -> MetricsLedger:
        cfg = self.cfg
        rng = self.rngs.get("scenario")
        n = min(cfg.alert_senders, len(self.device_ids))
        senders = sorted(rng.choice(self.device_ids, size=n, replace=False).tolist())
        for k, sender in enumerate(senders):
            t0 = cfg.warning.start_time + 0.1 * k
            self.sim.call_at(t0, lambda e, s=sender: self.propose(s), kind="transmit-start")
        self.sim.run_until(cfg.duration)
        self.ledger.extras["coverage"] = (
            len(self.reached) / len(self.device_ids) if self.device_ids else 0.0)
        self.ledger.extras["total_messages"] = float(
            sum(self.ledger.messages_by_kind.values()))
        self.ledger.check_invariants()
        return self.ledger

    def propose(self, sender: str) -> None:
        now = self.sim.now
        pos = self.positions.pos(sender, now)
        alert = Alert(self.next_msg_id("a"), "incident", pos, now, sender)
        self.alerts[alert.id] = alert
        node = self.nodes[sender]
        node.seen.add(alert.id)
        self.reached.add(sender)
        if self.protocol == "none-assessment":
            self.flood_alert(sender, alert)
        elif self.protocol == "ctd-passive":
            self.broadcast_alert(sender, alert, passive=True)
        elif self.protocol == "ctd-query":
            self.query_initiate(sender, alert)

    def _alert_msg(self, alert: Alert, kind: str, size: int, now: float) -> Message:
        return Message(alert.id, kind, alert.origin, now, size, 64, payload=alert)

    def flood_alert(self, sender: str, alert: Alert) -> None:
        msg = self._alert_msg(alert, "alert", ALERT_SIZE, self.sim.now)
        self.broadcast(sender, msg, self.on_flood_alert)

    def on_flood_alert(self, receiver: str, msg: Message, t: float) -> None:
        node = self.nodes[receiver]
        if msg.id in node.seen:
            self.ledger.record_duplicate(t)
            return
        node.seen.add(msg.id)
        self.reached.add(receiver)
        delay = float(self.jitter_rng.uniform(0.0, self.cfg.jitter_max))
        self.sim.call_after(delay,
                            lambda e: self.flood_alert(receiver, msg.payload),
                            kind="transmit-start")

    def query_initiate(self, detector: str, alert: Alert) -> None:
        now = self.sim.now
        msg = self._alert_msg(alert, "ctd-query", REPLY_SIZE, now)
        replies = {"confirm": 0, "total": 0}

        def on_query(receiver: str, m: Message, t: float) -> None:
            node = self.nodes[receiver]
            key = ("replied", m.id)
            if key in node.seen:
                return
            node.seen.add(key)
            confirm = reply_draw(self.assess_rng, self.cfg.ctd.p_a)
            delay = float(self.jitter_rng.uniform(0.0, self.cfg.ctd.reply_window * 0.4))
            reply = Message(self.next_msg_id("r"), "ctd-reply", m.origin,
                            t, REPLY_SIZE, 1, payload=(m.id, confirm),
                            dest=detector)

            def send_reply(_e):
                self.broadcast(receiver, reply, on_reply)

            self.sim.call_after(delay, send_reply, kind="transmit-start")

        def on_reply(receiver: str, m: Message, t: float) -> None:
            if receiver != m.dest:
                return
            if t > now + self.cfg.ctd.reply_window:
                return
            _alert_id, confirm = m.payload
            replies["total"] += 1
            if confirm:
                replies["confirm"] += 1

        def close_window(_e):
            if majority_confirms(replies["confirm"], replies["total"],
                                 self.cfg.ctd.majority_threshold):
                self.flood_alert(detector, alert)
            # else: discarded; the query is not repeated

        self.broadcast(detector, msg, on_query)
        self.sim.call_after(self.cfg.ctd.reply_window, close_window, kind="timer-expiry")

    def broadcast_alert(self, sender: str, alert: Alert, passive: bool) -> None:
        msg = self._alert_msg(alert, "alert", ALERT_SIZE, self.sim.now)
        self.broadcast(sender, msg, self.on_passive_alert)

    def on_passive_alert(self, receiver: str, msg: Message, t: float) -> None:
        node = self.nodes[receiver]
        alert: Alert = msg.payload
        if msg.id in node.seen:
            self.ledger.record_duplicate(t)
            return
        seen_alerts = [self.alerts[a] for a in node.seen
                       if isinstance(a, str) and a in self.alerts]
        action, dup = passive_accept(alert, seen_alerts, self.cfg.ctd, self.assess_rng)
        node.seen.add(msg.id)
        self.alerts.setdefault(alert.id, alert)
        if dup:
            self.ledger.record_duplicate(t)
            return
        self.reached.add(receiver)
        if action == "rebroadcast":
            delay = float(self.jitter_rng.uniform(0.0, self.cfg.jitter_max))
            self.sim.call_after(delay,
                                lambda e: self.broadcast_alert(receiver, alert, True),
                                kind="transmit-start")

    def forward_warning(self, sender: str, msg: Message) -> None:
        pass


def build_run(cfg: ScenarioConfig, density: float, protocol_label: str,
              seed: int) -> Run:
    cfg, protocol = expand_protocol(cfg, protocol_label)
    if protocol in ROUTING_PROTOCOLS:
        return RoutingRun(cfg, density, protocol, seed)
    if protocol in CTD_PROTOCOLS:
        return CtdRun(cfg, density, protocol, seed)
    return DisseminationRun(cfg, density, protocol, seed)


def execute_run(cfg: ScenarioConfig, density: float, protocol: str,
                seed: int) -> MetricsLedger:
    return build_run(cfg, density, protocol, seed).execute()
