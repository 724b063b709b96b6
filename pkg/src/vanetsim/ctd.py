"""Collaborative alert assessment for pedestrian ad hoc networks:
query-based (confirm-by-majority) and passive (local comparison) schemes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np


@dataclass(frozen=True)
class Alert:
    id: str
    event_type: str
    origin: tuple[float, float]
    created: float
    proposer: str


@dataclass
class CtdConfig:
    reply_window: float = 2.0
    majority_threshold: float = 0.5   # strict: confirms/replies must exceed this
    p_a: float = 0.0                  # probability a node refuses the alert
    dup_radius: float = 100.0
    dup_window: float = 60.0

    def validate(self) -> list[str]:
        errors = []
        if not 0.0 <= self.p_a <= 1.0:
            errors.append("ctd.p_a must be in [0, 1]")
        if self.reply_window <= 0:
            errors.append("ctd.reply_window must be positive")
        if self.dup_radius < 0 or self.dup_window < 0:
            errors.append("ctd duplicate radius/window must be non-negative")
        return errors


def alert_similarity(a: Alert, b: Alert, cfg: CtdConfig) -> bool:
    """Same event type, origins within dup_radius, creation within dup_window."""
    if a.event_type != b.event_type:
        return False
    dx = a.origin[0] - b.origin[0]
    dy = a.origin[1] - b.origin[1]
    if dx * dx + dy * dy > cfg.dup_radius * cfg.dup_radius:
        return False
    return abs(a.created - b.created) <= cfg.dup_window


def reply_draw(rng: np.random.Generator, p_a: float) -> bool:
    """One neighbor's verdict: True = confirm (probability 1 - p_a)."""
    return rng.random() >= p_a


def majority_confirms(confirms: int, total_replies: int, threshold: float = 0.5) -> bool:
    """Broadcast decision at the end of the reply window.

    Zero replies discard; absent replies never count as denials.
    """
    if total_replies == 0:
        return False
    return confirms / total_replies > threshold


def passive_accept(incoming: Alert, seen: Iterable[Alert], cfg: CtdConfig,
                   rng: np.random.Generator) -> tuple[str, bool]:
    """Passive-scheme decision: (action, is_duplicate).

    action is 'rebroadcast' or 'suppress'; duplicates of any similar alert
    already seen are always suppressed, fresh alerts are accepted with
    probability 1 - p_a.
    """
    for prior in seen:
        if alert_similarity(incoming, prior, cfg):
            return "suppress", True
    if rng.random() < 1.0 - cfg.p_a:
        return "rebroadcast", False
    return "suppress", False
