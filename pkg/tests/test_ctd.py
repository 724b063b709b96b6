"""Collaborative alert assessment: similarity, majority voting and the
passive local-comparison scheme."""

from __future__ import annotations

import numpy as np

from hypothesis import given
from hypothesis import strategies as st

from vanetsim.ctd import (Alert, CtdConfig, alert_similarity, majority_confirms,
                          passive_accept, reply_draw)


def alert(aid="a", etype="accident", origin=(0.0, 0.0), created=0.0, by="p0"):
    return Alert(aid, etype, origin, created, by)


def cfg(**over):
    base = dict(reply_window=2.0, majority_threshold=0.5, p_a=0.0,
                dup_radius=100.0, dup_window=60.0)
    base.update(over)
    return CtdConfig(**base)


def test_similarity_requires_type_distance_and_recency():
    c = cfg()
    assert alert_similarity(alert(), alert("b", origin=(60.0, 80.0)), c)
    assert not alert_similarity(alert(), alert("b", etype="fire"), c)
    assert not alert_similarity(alert(), alert("b", origin=(101.0, 0.0)), c)
    assert not alert_similarity(alert(), alert("b", created=61.0), c)


def test_similarity_boundaries_are_inclusive():
    c = cfg()
    assert alert_similarity(alert(), alert("b", origin=(100.0, 0.0)), c)
    assert alert_similarity(alert(), alert("b", created=60.0), c)


def test_majority_needs_a_strict_majority():
    assert majority_confirms(2, 3)
    assert not majority_confirms(1, 2)    # exactly half is not a majority
    assert not majority_confirms(0, 3)
    assert majority_confirms(3, 4, threshold=0.7)


def test_zero_replies_discard_the_alert():
    assert not majority_confirms(0, 0)


def test_reply_draw_probability_is_one_minus_pa():
    rng = np.random.default_rng(0)
    n = 200_000
    confirms = sum(reply_draw(rng, 0.3) for _ in range(n))
    assert abs(confirms / n - 0.7) < 0.005
    assert reply_draw(np.random.default_rng(1), 0.0) is True
    assert reply_draw(np.random.default_rng(1), 1.0) is False


def test_passive_scheme_suppresses_similar_alerts_deterministically():
    c = cfg(p_a=1.0)  # even a maximally sceptical node suppresses duplicates
    seen = [alert("old")]
    action, dup = passive_accept(alert("new", origin=(10.0, 0.0)), seen, c,
                                 np.random.default_rng(0))
    assert action == "suppress" and dup


def test_passive_scheme_accepts_fresh_alerts_with_prob_one_minus_pa():
    c = cfg(p_a=0.0)
    action, dup = passive_accept(alert(), [], c, np.random.default_rng(0))
    assert action == "rebroadcast" and not dup
    c = cfg(p_a=1.0)
    action, dup = passive_accept(alert(), [], c, np.random.default_rng(0))
    assert action == "suppress" and not dup


def test_passive_acceptance_rate_tracks_pa():
    c = cfg(p_a=0.4)
    rng = np.random.default_rng(5)
    n = 100_000
    accepted = sum(passive_accept(alert(), [], c, rng)[0] == "rebroadcast"
                   for _ in range(n))
    assert abs(accepted / n - 0.6) < 0.01


def test_config_validation_collects_errors():
    bad = CtdConfig(reply_window=0.0, majority_threshold=0.5, p_a=1.5,
                    dup_radius=-1.0, dup_window=60.0)
    errors = bad.validate()
    assert len(errors) >= 3
    assert cfg().validate() == []


@given(st.integers(min_value=0, max_value=50), st.integers(min_value=0, max_value=50))
def test_majority_is_monotone_in_confirms(confirms, extra):
    total = confirms + extra
    if majority_confirms(confirms, total):
        assert majority_confirms(min(total, confirms + 1), total)
