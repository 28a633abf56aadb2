"""
Turns what the operating system reports about the link and what the
application says about a transmission into the constraints profiles are
selected against.

The monitor state is an immutable record threaded through :func:`ingest`::

    state = MonitorState.initial()
    for obs in TraceReader(open('trace.csv')):
        state = ingest(state, obs)
    constraints = derive_constraints(state, meta)

Bandwidth is tracked as an exponentially weighted moving average, packet
error rate over a sliding window. A link is overloaded once the windowed
error rate stays above ``overload_enter`` for ``overload_consecutive``
ingests; it recovers only when the windowed rate falls below
``overload_exit``.
"""
import logging

import numpy

from .errors import NotReadyError, OrderingError
from .record import Record
from .registry import SECURITY_LEVELS
from .validators import Bool, Enum, Integer, ListOf, Nested, Number

__all__ = [
    'URGENCIES',
    'LinkObservation',
    'AppMetadata',
    'ScheduledMetadata',
    'MetadataSchedule',
    'ConstraintSet',
    'DerivationPolicy',
    'MonitorState',
    'ingest',
    'detect_overload',
    'derive_constraints',
]

log = logging.getLogger(__name__)

URGENCIES = ('background', 'normal', 'urgent')


class LinkObservation(Record):
    timestamp_ms = Number(minimum=0)
    goodput_bps = Number(minimum=0, optional=True)
    per = Number(minimum=0, maximum=1, optional=True)
    rssi_dbm = Number(optional=True)


class AppMetadata(Record):
    urgency = Enum(*URGENCIES)
    min_security_bits = Integer(choices=SECURITY_LEVELS)
    require_pq = Bool(optional=True, default_value=False)
    latency_budget_ms = Number(above=0, optional=True)


class ScheduledMetadata(Record):
    from_ms = Number(minimum=0)
    metadata = Nested(AppMetadata)


class MetadataSchedule(Record):
    """
    Application metadata that changes over time, e.g. when traffic moves to a
    public backup network and demands more security. The metadata in force at
    ``t`` is the last entry starting at or before ``t`` (the first entry before
    that).
    """
    entries = ListOf(Nested(ScheduledMetadata), min_items=1)

    @classmethod
    def check_fields(cls, values):
        starts = [e.from_ms for e in values['entries']]
        if starts != sorted(starts):
            return {'entries': "entries must be ordered by from_ms"}
        return {}


    @classmethod
    def constant(cls, meta):
        return cls(entries=(ScheduledMetadata(from_ms=0, metadata=meta),))


    def at(self, t):
        current = self.entries[0].metadata
        for e in self.entries:
            if e.from_ms > t:
                break
            current = e.metadata
        return current


class ConstraintSet(Record):
    max_handshake_bytes = Integer(minimum=0, optional=True)
    bandwidth_estimate = Number(minimum=0, optional=True, default_value=0.0)
    per_estimate = Number(minimum=0, maximum=1, optional=True, default_value=0.0)
    min_security_bits = Integer(choices=SECURITY_LEVELS)
    require_pq = Bool(optional=True, default_value=False)
    latency_budget_ms = Number(above=0, optional=True)
    overload = Bool(optional=True, default_value=False)


class DerivationPolicy(Record):
    """
    Tunables of the monitor. Deadlines convert an urgency into the time a
    handshake may take on the current link, and so into a byte budget.
    """
    alpha = Number(above=0, maximum=1, optional=True, default_value=0.2)
    window = Integer(minimum=1, optional=True, default_value=5)
    overload_enter = Number(minimum=0, maximum=1, optional=True, default_value=0.10)
    overload_exit = Number(minimum=0, maximum=1, optional=True, default_value=0.05)
    overload_consecutive = Integer(minimum=1, optional=True, default_value=3)
    deadline_urgent_s = Number(above=0, optional=True, default_value=1)
    deadline_normal_s = Number(above=0, optional=True, default_value=5)
    deadline_background_s = Number(above=0, optional=True, default_value=30)

    @classmethod
    def check_fields(cls, values):
        if values['overload_exit'] > values['overload_enter']:
            return {'overload_exit': "must not exceed overload_enter"}
        return {}


    def deadline_s(self, urgency):
        return getattr(self, 'deadline_%s_s' % urgency)


class MonitorState(Record):
    policy = Nested(DerivationPolicy)
    observations = Integer(minimum=0)
    last_timestamp_ms = Number(minimum=0, optional=True)
    bandwidth_estimate = Number(minimum=0, optional=True)
    per_window = ListOf(Number(minimum=0, maximum=1))
    above_streak = Integer(minimum=0)
    overload = Bool()
    rssi_dbm = Number(optional=True)

    @classmethod
    def initial(cls, policy=None):
        return cls(policy=policy or DerivationPolicy(), observations=0, per_window=(),
                   above_streak=0, overload=False)


    @property
    def per_estimate(self):
        if not self.per_window:
            return 0.0
        return float(numpy.mean(self.per_window))


def ingest(state, obs):
    """
    Fold one observation into the state and return the new state. Missing
    goodput leaves the bandwidth estimate alone, missing PER the window.
    Raises :class:`~tlsfit.errors.OrderingError` for an observation older than
    the last one.
    """
    if state.last_timestamp_ms is not None and obs.timestamp_ms < state.last_timestamp_ms:
        raise OrderingError("observation at %s ms is older than the last one at %s ms" % (
            obs.timestamp_ms, state.last_timestamp_ms))

    policy = state.policy
    changes = dict(observations=state.observations + 1, last_timestamp_ms=obs.timestamp_ms)

    if obs.goodput_bps is not None:
        if state.bandwidth_estimate is None:
            changes['bandwidth_estimate'] = float(obs.goodput_bps)
        else:
            est = state.bandwidth_estimate
            changes['bandwidth_estimate'] = est + policy.alpha * (obs.goodput_bps - est)

    if obs.per is not None:
        window = (state.per_window + (obs.per,))[-policy.window:]
        mean = float(numpy.mean(window))
        streak = state.above_streak + 1 if mean > policy.overload_enter else 0
        overload = state.overload
        if not overload and streak >= policy.overload_consecutive:
            overload = True
            log.info("overload detected at %s ms (PER %.3f)", obs.timestamp_ms, mean)
        elif overload and mean < policy.overload_exit:
            overload = False
            log.info("overload cleared at %s ms (PER %.3f)", obs.timestamp_ms, mean)
        changes.update(per_window=window, above_streak=streak, overload=overload)

    if obs.rssi_dbm is not None:
        changes['rssi_dbm'] = obs.rssi_dbm

    return state.replace(**changes)


def detect_overload(state):
    return state.overload


def derive_constraints(state, meta, policy=None):
    """
    The constraints in force for ``meta`` given what the monitor has seen::

        # 80 kbit/s, normal urgency (5 s deadline)
        derive_constraints(state, meta).max_handshake_bytes # 50000
    """
    policy = policy or state.policy
    if state.observations == 0:
        raise NotReadyError("no observations ingested yet")
    if state.bandwidth_estimate is None:
        raise NotReadyError("no goodput observed yet")

    bw = state.bandwidth_estimate
    return ConstraintSet(
        max_handshake_bytes=int(bw * policy.deadline_s(meta.urgency) / 8),
        bandwidth_estimate=bw,
        per_estimate=state.per_estimate,
        min_security_bits=meta.min_security_bits,
        require_pq=meta.require_pq,
        latency_budget_ms=meta.latency_budget_ms,
        overload=detect_overload(state))
