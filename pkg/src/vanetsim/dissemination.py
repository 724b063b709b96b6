"""Warning-message dissemination: utility-driven suppression games,
retransmission timer schemes, store-carry-forward, and baseline relays."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

DEFAULT_ALPHA1 = 6.0
DEFAULT_ALPHA2 = 4.0


@dataclass
class UtilityInputs:
    df: float
    lqf: float
    alpha1: float = DEFAULT_ALPHA1
    alpha2: float = DEFAULT_ALPHA2

    def check(self) -> None:
        if not 0.0 <= self.df <= 1.0:
            raise ValueError("df must be in [0, 1]")
        if not 0.0 <= self.lqf <= 1.0:
            raise ValueError("lqf must be in [0, 1]")
        if abs(self.alpha1 + self.alpha2 - 10.0) > 1e-9:
            raise ValueError("alpha1 + alpha2 must equal 10")


@dataclass
class GameConfig:
    mechanism: str = "volunteer-dilemma"  # or "forwarding-game"
    cost_k: float = 1.0
    fg_benefit: float = 2.0
    fg_cost: float = 1.0
    fg_tol: float = 1e-6
    fg_max_iters: int = 100

    def validate(self) -> list[str]:
        errors = []
        if self.mechanism not in ("volunteer-dilemma", "forwarding-game"):
            errors.append(f"unknown game mechanism {self.mechanism!r}")
        if self.cost_k <= 0:
            errors.append("game.cost_k must be positive")
        if not self.fg_cost < self.fg_benefit:
            errors.append("game.fg_cost must be below game.fg_benefit")
        return errors


@dataclass
class TimerConfig:
    scheme: str = "speed"      # fixed | speed | map
    fixed_interval: float = 1.0
    t_min: float = 1.0
    t_max: float = 5.0
    poll_interval: float = 0.5

    def validate(self) -> list[str]:
        errors = []
        if self.scheme not in ("fixed", "speed", "map"):
            errors.append(f"unknown timer scheme {self.scheme!r}")
        if not 0 < self.t_min <= self.t_max:
            errors.append("timers require 0 < t_min <= t_max")
        if self.fixed_interval <= 0:
            errors.append("timers.fixed_interval must be positive")
        return errors


@dataclass
class DisseminationState:
    """Per-node, per-message bookkeeping."""
    first_heard: float
    times_heard: int = 1
    last_sender_distance: float = 0.0
    scf_buffered: bool = False
    forwarded: bool = False
    timer_handle: object = None
    neighbors_at_receipt: frozenset = frozenset()
    last_relay_intersection: Optional[int] = None
    stored_msg: object = None
    timer_started: float = 0.0
    last_tx: float = 0.0


def distance_factor(d_sr: float, d_rint: float, r_max: float) -> float:
    """Relay-worthiness of a receiver's position.

    Far receivers score by their sender distance; receivers with an
    intersection within the transmission range score by a decreasing function
    of the intersection distance (closer to the junction is better).
    """
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    if not 0.0 <= d_sr <= r_max:
        raise ValueError(f"d_sr={d_sr} outside [0, r_max={r_max}]: cannot hear the sender")
    if d_rint < 0:
        raise ValueError("d_rint must be non-negative")
    if d_rint > r_max:
        return d_sr / r_max
    return 1.0 - d_rint / (d_rint + 1.0)


def utility(u_in: UtilityInputs) -> float:
    """10^(10 - (alpha1*df + alpha2*lqf)); lower utility marks a better relay."""
    u_in.check()
    return 10.0 ** (10.0 - (u_in.alpha1 * u_in.df + u_in.alpha2 * u_in.lqf))


def vod_forward_probability(u: float, n_candidates: int, cost_k: float = 1.0) -> float:
    """Volunteer's-dilemma forwarding probability.

    The lowest-utility (best) candidate always forwards; responsibility
    diffuses as the candidate count grows.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be at least 1")
    if cost_k <= 0:
        raise ValueError("cost_k must be positive")
    if n_candidates == 1 or u <= cost_k:
        return 1.0
    p = (cost_k / u) ** (n_candidates - 1)
    return min(1.0, max(0.0, p))


def availability(d_sr: float, r_max: float, abe_norm: float) -> float:
    """Normalized willingness of a candidate: half distance, half bandwidth."""
    if d_sr > r_max:
        raise ValueError("d_sr must not exceed r_max")
    return 0.5 * (d_sr / r_max) + 0.5 * abe_norm


def forwarding_game_equilibrium(avails: list[float],
                                cfg: GameConfig) -> tuple[list[float], bool]:
    """Mixed-strategy fixed point of the forwarding game.

    Each player i with benefit*a_i > cost mixes so the others are indifferent:
    q_{-i} = 1 - cost/(benefit*a_i) where q_{-i} is the probability at least
    one other player forwards.  Damped iteration from p_i = 0.5; returns
    (probabilities, converged).
    """
    n = len(avails)
    if n < 1:
        raise ValueError("need at least one player")
    b, c = cfg.fg_benefit, cfg.fg_cost
    a = np.asarray(avails, dtype=float)
    active = b * a > c
    p = np.where(active, 0.5, 0.0)
    q_star = np.where(active, 1.0 - c / np.maximum(b * a, c), 0.0)
    converged = False
    for _ in range(cfg.fg_max_iters):
        # q_minus[i] = 1 - prod_{j != i} (1 - p_j); split the total product
        # per player, recomputing exactly where a factor is zero
        one_minus = 1.0 - p
        zeros = np.flatnonzero(one_minus == 0.0)
        if zeros.size == 0:
            prod_minus = np.prod(one_minus) / one_minus
        elif zeros.size == 1:
            prod_minus = np.zeros(n)
            mask = np.ones(n, dtype=bool)
            mask[zeros[0]] = False
            prod_minus[zeros[0]] = np.prod(one_minus[mask])
        else:
            prod_minus = np.zeros(n)
        new_p = np.clip(p + 0.5 * (q_star - (1.0 - prod_minus)), 0.0, 1.0)
        new_p = np.where(active, new_p, 0.0)
        # once a single player saturates at 1, every other player sees
        # q_{-i} = 1 >= q*_i, so the iteration glides them monotonically to 0;
        # jump straight to that fixed point instead of creeping there
        ones = np.flatnonzero(new_p == 1.0)
        if ones.size == 1:
            limit = np.zeros(n)
            limit[ones[0]] = 1.0
            return limit.tolist(), True
        max_change = float(np.max(np.abs(new_p - p))) if n else 0.0
        p = new_p
        if max_change < cfg.fg_tol:
            converged = True
            break
    return p.tolist(), converged


def retransmission_delay(scheme: str, v: float, v_max: float,
                         at_intersection: bool, cfg: TimerConfig,
                         elapsed: float = 0.0) -> float:
    """Delay until the next retransmission attempt under the given scheme."""
    if not 0.0 <= v <= v_max:
        raise ValueError("require 0 <= v <= v_max")
    if scheme == "fixed":
        return cfg.fixed_interval
    if scheme == "speed":
        return cfg.t_min + (cfg.t_max - cfg.t_min) * (1.0 - v / v_max)
    if scheme == "map":
        # the epsilon absorbs float rounding when a poll lands a hair before
        # the deadline; without it the residual delay shrinks geometrically
        if at_intersection or elapsed >= cfg.t_max - 1e-9:
            return 0.0
        return min(cfg.poll_interval, cfg.t_max - elapsed)
    raise ValueError(f"unknown timer scheme {scheme!r}")


# --- per-reception relay decisions -----------------------------------------

DISSEMINATION_PROTOCOLS = (
    "flooding-distance", "jsf", "nsf", "njl", "add-vod", "add-fg", "timer-relay",
)


@dataclass
class ReceptionContext:
    """Everything a relay decision may look at, gathered by the engine."""
    d_sr: float                    # distance receiver-sender, meters
    d_rint: float                  # distance receiver-nearest intersection
    r_max: float
    lqf: float
    n_candidates: int              # fresh neighbors of the receiver (>= 0)
    at_intersection: bool
    intersection_id: int
    neighbor_d_rint: list[float]   # candidates' distances to their nearest junction
    abe_norm: float
    candidate_avails: list[float]  # availabilities of co-hearing candidates (incl self first)


@dataclass
class Decision:
    action: str                    # forward | suppress | store
    probability: float = 1.0
    fg_converged: bool = True


def decide_forward(protocol: str, ctx: ReceptionContext, game: GameConfig,
                   rng: np.random.Generator, *,
                   d_threshold: Optional[float] = None,
                   alpha1: float = DEFAULT_ALPHA1,
                   alpha2: float = DEFAULT_ALPHA2) -> Decision:
    """First-reception relay decision for the one-shot protocols.

    JSF/NSF/timer-relay re-attempts are timer-driven and handled by the
    engine; this covers the probabilistic and geometric one-shot rules.
    """
    if ctx.n_candidates == 0 and protocol != "njl":
        return Decision("store")
    if protocol == "flooding-distance":
        thresh = 0.8 * ctx.r_max if d_threshold is None else d_threshold
        return Decision("forward" if ctx.d_sr > thresh else "suppress")
    if protocol == "njl":
        if all(ctx.d_rint <= other + 1e-12 for other in ctx.neighbor_d_rint):
            return Decision("forward")
        return Decision("suppress")
    if protocol == "add-vod":
        df = distance_factor(ctx.d_sr, ctx.d_rint, ctx.r_max)
        u = utility(UtilityInputs(df, ctx.lqf, alpha1, alpha2))
        p = vod_forward_probability(u, max(1, ctx.n_candidates), game.cost_k)
        return Decision("forward" if rng.random() < p else "suppress", p)
    if protocol == "add-fg":
        avails = ctx.candidate_avails or [availability(ctx.d_sr, ctx.r_max, ctx.abe_norm)]
        probs, converged = forwarding_game_equilibrium(avails, game)
        p = probs[0]  # receiver's own availability is listed first
        return Decision("forward" if rng.random() < p else "suppress", p, converged)
    raise ValueError(f"no one-shot decision rule for protocol {protocol!r}")
