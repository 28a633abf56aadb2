"""
A discrete-event simulation of polling devices sharing one constrained
wireless link, built on :mod:`simpy`.

Each direction of the link is a FIFO server: a packet waits for the packets
ahead of it, is serialised at ``bytes * 8 / capacity`` and then propagates for
half the base RTT. A packet is lost with probability ``per`` or when the
queue would exceed ``queue_limit_bytes``; lost packets are sent again
``rto_ms`` later, and after ``max_tries`` attempts the whole transaction is
dropped.

Devices poll open-loop every ``poll_interval_ms``. A transaction sends the
handshake (when the session policy asks for one), then the request up and
the reply down; its latency runs from start to the delivery of the reply::

    link = LinkModel(uplink_capacity=64000, downlink_capacity=64000)
    workload = Workload(n_devices=1)
    run(link, workload, seed=1, duration_ms=10000).latency.median_ms # 40.0

Randomness comes from one seeded :func:`numpy.random.default_rng`, so a run
is fully determined by its inputs.
"""
import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy
import simpy

from .errors import ConfigurationError
from .monitor import LinkObservation
from .record import Record
from .traces import write_trace
from .validators import Bool, Enum, Integer, InvalidError, ListOf, Nested, Number

__all__ = [
    'LinkModel',
    'Workload',
    'Scenario',
    'LatencySummary',
    'Transaction',
    'SimMetrics',
    'run',
    'run_scenario',
    'run_sweep',
    'emit_trace',
]

log = logging.getLogger(__name__)

UP = 'up'
DOWN = 'down'


class LinkModel(Record):
    uplink_capacity = Number(above=0)
    downlink_capacity = Number(above=0)
    base_rtt_ms = Number(minimum=0, optional=True, default_value=0)
    per = Number(minimum=0, below=1, optional=True, default_value=0.0)
    queue_limit_bytes = Integer(minimum=1, optional=True, default_value=65536)
    packet_bytes = Integer(minimum=1, optional=True, default_value=1400)
    rto_ms = Number(above=0, optional=True, default_value=200)
    max_tries = Integer(minimum=1, optional=True, default_value=5)

    @classmethod
    def check_fields(cls, values):
        if values['queue_limit_bytes'] <= values['packet_bytes']:
            return {'queue_limit_bytes': "must exceed packet_bytes (%d)" % values['packet_bytes']}
        return {}


    def capacity(self, direction):
        return self.uplink_capacity if direction == UP else self.downlink_capacity


class Workload(Record):
    """
    The default transaction is a 38 byte request answered by a 282 byte
    reply once a second. ``handshake`` is ``(up_bytes, down_bytes)``.
    Setting ``start_jitter`` to false starts every device at once.
    """
    n_devices = Integer(minimum=0)
    poll_interval_ms = Number(above=0, optional=True, default_value=1000)
    request_bytes = Integer(minimum=1, optional=True, default_value=38)
    reply_bytes = Integer(minimum=1, optional=True, default_value=282)
    handshake = ListOf(Integer(minimum=1), optional=True)
    session_policy = Enum('handshake_once', 'handshake_every_poll', optional=True,
                          default_value='handshake_once')
    start_jitter = Bool(optional=True, default_value=True)

    @classmethod
    def check_fields(cls, values):
        if values.get('handshake') is not None and len(values['handshake']) != 2:
            return {'handshake': "expected (up_bytes, down_bytes)"}
        return {}


class Scenario(Record):
    link = Nested(LinkModel)
    workload = Nested(Workload)
    seed = Integer(minimum=0, optional=True, default_value=0)
    duration_ms = Number(above=0)
    trace_window_ms = Number(above=0, optional=True, default_value=1000)


class LatencySummary(Record):
    count = Integer(minimum=0)
    min_ms = Number(optional=True)
    p25_ms = Number(optional=True)
    median_ms = Number(optional=True)
    p75_ms = Number(optional=True)
    p95_ms = Number(optional=True)
    max_ms = Number(optional=True)

    @classmethod
    def of(cls, latencies):
        if not len(latencies):
            return cls(count=0)
        a = numpy.asarray(latencies, dtype=float)
        p25, median, p75, p95 = (float(x) for x in numpy.percentile(a, [25, 50, 75, 95]))
        return cls(count=len(a), min_ms=float(a.min()), p25_ms=p25, median_ms=median,
                   p75_ms=p75, p95_ms=p95, max_ms=float(a.max()))


class Transaction(Record):
    device_id = Integer(minimum=0)
    start_ms = Number(minimum=0)
    latency_ms = Number(minimum=0)
    retries = Integer(minimum=0)


class SimMetrics(Record):
    latency = Nested(LatencySummary)
    per_device = ListOf(Nested(LatencySummary))
    completed = Integer(minimum=0)
    dropped_transactions = Integer(minimum=0)
    retransmissions = Integer(minimum=0)
    packets_sent = Integer(minimum=0)
    packets_lost = Integer(minimum=0)
    bytes_offered_up = Integer(minimum=0)
    bytes_delivered_up = Integer(minimum=0)
    bytes_dropped_up = Integer(minimum=0)
    bytes_offered_down = Integer(minimum=0)
    bytes_delivered_down = Integer(minimum=0)
    bytes_dropped_down = Integer(minimum=0)
    simulated_duration_ms = Number(minimum=0)
    transactions = ListOf(Nested(Transaction))
    observations = ListOf(Nested(LinkObservation))


class _Channel(object):
    """
    One direction of the link: a single FIFO server plus byte accounting.
    """

    def __init__(self, env, capacity, queue_limit):
        self.env = env
        self.capacity = capacity
        self.queue_limit = queue_limit
        self.server = simpy.Resource(env, capacity=1)
        self.queued = 0
        self.offered = 0
        self.delivered = 0
        self.dropped = 0


class _Simulation(object):

    def __init__(self, link, workload, seed, duration_ms, window_ms):
        self.env = simpy.Environment()
        self.link = link
        self.workload = workload
        self.duration_ms = duration_ms
        self.window_ms = window_ms
        self.rng = numpy.random.default_rng(seed)
        self.channels = {
            UP: _Channel(self.env, link.uplink_capacity, link.queue_limit_bytes),
            DOWN: _Channel(self.env, link.downlink_capacity, link.queue_limit_bytes),
        }
        self.transactions = []
        self.dropped_transactions = 0
        self.retransmissions = 0
        self.packets_sent = 0
        self.packets_lost = 0
        # window index => [sent, lost, delivered bytes]
        self.windows = {}


    def _count(self, size, lost):
        w = self.windows.setdefault(int(self.env.now // self.window_ms), [0, 0, 0])
        w[0] += 1
        if lost:
            w[1] += 1
            self.packets_lost += 1
        else:
            w[2] += size
        self.packets_sent += 1


    def transmit(self, direction, size):
        """
        One attempt at one packet. Evaluates to True when it got through.
        """
        ch = self.channels[direction]
        ch.offered += size
        if ch.queued + size > ch.queue_limit:
            ch.dropped += size
            self._count(size, True)
            return False

        ch.queued += size
        with ch.server.request() as req:
            yield req
            yield self.env.timeout(size * 8 * 1000.0 / ch.capacity)
        ch.queued -= size

        if self.link.per > 0 and self.rng.random() < self.link.per:
            ch.dropped += size
            self._count(size, True)
            return False

        yield self.env.timeout(self.link.base_rtt_ms / 2.0)
        ch.delivered += size
        self._count(size, False)
        return True


    def packet(self, direction, size, stats):
        for attempt in range(self.link.max_tries):
            if attempt:
                self.retransmissions += 1
                stats['retries'] += 1
            ok = yield self.env.process(self.transmit(direction, size))
            if ok:
                return True
            if attempt + 1 < self.link.max_tries:
                yield self.env.timeout(self.link.rto_ms)
        return False


    def message(self, direction, nbytes, stats):
        full, rest = divmod(nbytes, self.link.packet_bytes)
        sizes = [self.link.packet_bytes] * full + ([rest] if rest else [])
        packets = [self.env.process(self.packet(direction, s, stats)) for s in sizes]
        results = yield self.env.all_of(packets)
        return all(results.values())


    def transaction(self, device_id, with_handshake):
        w = self.workload
        start = self.env.now
        stats = {'retries': 0}
        steps = []
        if with_handshake:
            steps += [(UP, w.handshake[0]), (DOWN, w.handshake[1])]
        steps += [(UP, w.request_bytes), (DOWN, w.reply_bytes)]

        for direction, nbytes in steps:
            ok = yield self.env.process(self.message(direction, nbytes, stats))
            if not ok:
                self.dropped_transactions += 1
                log.debug("device %d: transaction started at %.1f ms dropped", device_id, start)
                return
        self.transactions.append(Transaction(
            device_id=device_id, start_ms=start, latency_ms=self.env.now - start,
            retries=stats['retries']))


    def device(self, device_id):
        w = self.workload
        if w.start_jitter:
            yield self.env.timeout(float(self.rng.uniform(0, w.poll_interval_ms)))
        first = True
        while self.env.now < self.duration_ms:
            handshake = w.handshake is not None and (
                first or w.session_policy == 'handshake_every_poll')
            self.env.process(self.transaction(device_id, handshake))
            first = False
            yield self.env.timeout(w.poll_interval_ms)


    def run(self):
        for i in range(self.workload.n_devices):
            self.env.process(self.device(i))
        # devices stop polling at duration_ms; in-flight transactions drain
        self.env.run()
        return self.metrics()


    def observations(self):
        if not self.windows:
            return ()
        seconds = self.window_ms / 1000.0
        obs = []
        for i in range(max(self.windows) + 1):
            sent, lost, delivered = self.windows.get(i, (0, 0, 0))
            obs.append(LinkObservation(
                timestamp_ms=(i + 1) * self.window_ms,
                goodput_bps=delivered * 8 / seconds,
                per=(lost / sent) if sent else None))
        return tuple(obs)


    def metrics(self):
        up, down = self.channels[UP], self.channels[DOWN]
        by_device = [[] for _ in range(self.workload.n_devices)]
        for t in self.transactions:
            by_device[t.device_id].append(t.latency_ms)
        return SimMetrics(
            latency=LatencySummary.of([t.latency_ms for t in self.transactions]),
            per_device=tuple(LatencySummary.of(l) for l in by_device),
            completed=len(self.transactions),
            dropped_transactions=self.dropped_transactions,
            retransmissions=self.retransmissions,
            packets_sent=self.packets_sent,
            packets_lost=self.packets_lost,
            bytes_offered_up=up.offered,
            bytes_delivered_up=up.delivered,
            bytes_dropped_up=up.dropped,
            bytes_offered_down=down.offered,
            bytes_delivered_down=down.delivered,
            bytes_dropped_down=down.dropped,
            simulated_duration_ms=float(self.env.now),
            transactions=tuple(self.transactions),
            observations=self.observations())


def _check(record):
    try:
        record.validate()
    except InvalidError as e:
        raise ConfigurationError("invalid %s: %s" % (
            record.__class__.__name__, '; '.join("%s: %s" % f for f in e.flatten())
            if hasattr(e, 'flatten') else e))


def run(link, w, seed=0, duration_ms=60000, trace_window_ms=1000):
    """
    Simulate ``duration_ms`` of polling and return the metrics. Raises
    :class:`~tlsfit.errors.ConfigurationError` for an invalid link or
    workload, or a duration shorter than one poll interval.
    """
    _check(link)
    _check(w)
    if duration_ms < w.poll_interval_ms:
        raise ConfigurationError("duration %s ms is shorter than the poll interval %s ms" % (
            duration_ms, w.poll_interval_ms))
    log.info("simulating %d device(s) for %s ms (seed %d)", w.n_devices, duration_ms, seed)
    return _Simulation(link, w, seed, duration_ms, trace_window_ms).run()


def run_scenario(scenario):
    return run(scenario.link, scenario.workload, scenario.seed, scenario.duration_ms,
               scenario.trace_window_ms)


def run_sweep(scenarios, workers=None):
    """
    Run independent scenarios, in worker processes when ``workers`` > 1.
    Results come back in the order of ``scenarios``.
    """
    scenarios = list(scenarios)
    if not workers or workers <= 1:
        return [run_scenario(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_scenario, scenarios))


def emit_trace(metrics, out_dir, prefix=''):
    """
    Write ``<prefix>transactions.csv`` (device_id, start_ms, latency_ms,
    retries) and ``<prefix>observations.csv``, an observation trace the
    monitor can replay. Returns both paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    tx_path = os.path.join(out_dir, prefix + 'transactions.csv')
    obs_path = os.path.join(out_dir, prefix + 'observations.csv')
    with open(tx_path, 'w', newline='', encoding='utf-8') as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(['device_id', 'start_ms', 'latency_ms', 'retries'])
        for t in metrics.transactions:
            w.writerow([t.device_id, '%.3f' % t.start_ms, '%.3f' % t.latency_ms, t.retries])
    with open(obs_path, 'w', newline='', encoding='utf-8') as f:
        write_trace(metrics.observations, f)
    return tx_path, obs_path
