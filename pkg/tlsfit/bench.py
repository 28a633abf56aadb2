"""
Measurement campaigns over a matrix of TLS configurations.

Every configuration is run ``runs_per_config`` times, either through the cost
model (``backend='model'``) or through a real loopback handshake
(``backend='loopback'``). Per configuration the campaign keeps the raw
samples and their mean and population standard deviation::

    spec = CampaignSpec(configs=configs, runs_per_config=30)
    result = run_campaign(spec)
    print(render_text(compare(result, 'curve')))

A configuration the loopback stack can't run is recorded as skipped, one that
fails mid-run as an error; the rest of the campaign goes on.
"""
import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy

from . import documents
from .costmodel import TRANSPORT_MODES, apply_transport_overhead, app_record_bytes, \
    estimate_transcript
from .errors import ConfigurationError, TlsFitError
from .profiles import TlsConfig
from .record import Record
from .stack import PayloadSpec
from .validators import Enum, Integer, ListOf, Nested, Number, Text

__all__ = [
    'GROUPINGS',
    'CampaignSpec',
    'ConfigStats',
    'CampaignResult',
    'ComparisonRow',
    'run_campaign',
    'compare',
    'render_csv',
    'render_text',
    'render_dat',
    'write_outputs',
]

log = logging.getLogger(__name__)

OK = 'ok'
SKIPPED = 'skipped'
ERROR = 'error'

GROUPINGS = {
    'auth_mechanism': lambda config: config.signature_scheme,
    'curve': lambda config: config.key_exchange,
}


class CampaignSpec(Record):
    configs = ListOf(Nested(TlsConfig))
    runs_per_config = Integer(minimum=1, optional=True, default_value=30)
    backend = Enum('model', 'loopback', optional=True, default_value='model')
    payload = Nested(PayloadSpec, optional=True, default_value=PayloadSpec())
    transport = Enum(*TRANSPORT_MODES, optional=True, default_value='none')
    workers = Integer(minimum=1, optional=True, default_value=1)


class ConfigStats(Record):
    config = Nested(TlsConfig)
    status = Enum(OK, SKIPPED, ERROR)
    reason = Text(optional=True)
    samples_up = ListOf(Integer(minimum=0))
    samples_down = ListOf(Integer(minimum=0))
    mean_up = Number(optional=True)
    mean_down = Number(optional=True)
    mean_total = Number(optional=True)
    stddev_total = Number(optional=True)
    app_up_bytes = Number(optional=True)
    app_down_bytes = Number(optional=True)

    @classmethod
    def of(cls, config, samples, app=None):
        up = numpy.array([s[0] for s in samples], dtype=float)
        down = numpy.array([s[1] for s in samples], dtype=float)
        total = up + down
        app = app or [(None, None)]
        app_up = [a[0] for a in app if a[0] is not None]
        app_down = [a[1] for a in app if a[1] is not None]
        return cls(
            config=config, status=OK,
            samples_up=tuple(int(s[0]) for s in samples),
            samples_down=tuple(int(s[1]) for s in samples),
            mean_up=float(up.mean()),
            mean_down=float(down.mean()),
            mean_total=float(total.mean()),
            stddev_total=float(total.std(ddof=0)),
            app_up_bytes=float(numpy.mean(app_up)) if app_up else None,
            app_down_bytes=float(numpy.mean(app_down)) if app_down else None)


    @classmethod
    def failed(cls, config, status, reason):
        return cls(config=config, status=status, reason=reason, samples_up=(), samples_down=())


    @property
    def samples_total(self):
        return [u + d for u, d in zip(self.samples_up, self.samples_down)]


class CampaignResult(Record):
    backend = Enum('model', 'loopback')
    runs_per_config = Integer(minimum=1)
    stats = ListOf(Nested(ConfigStats))

    def completed(self):
        return [s for s in self.stats if s.status == OK]


class ComparisonRow(Record):
    group = Text()
    configs = Integer(minimum=1)
    samples = Integer(minimum=1)
    mean_up = Number()
    mean_down = Number()
    mean_total = Number()
    stddev_total = Number()


def _model_stats(config, spec):
    try:
        up, down = apply_transport_overhead(estimate_transcript(config), spec.transport)
        p = spec.payload
        app = (p.message_count * app_record_bytes(config, p.message_bytes),) * 2
    except TlsFitError as e:
        log.warning("%s: %s", config.label, e)
        return ConfigStats.failed(config, ERROR, str(e))
    return ConfigStats.of(config, [(up, down)] * spec.runs_per_config, [app])


def _loopback_stats(config, spec, adapter):
    if not adapter.supports(config):
        log.warning("%s: skipped, not supported by the loopback stack", config.label)
        return ConfigStats.failed(config, SKIPPED, "not supported by the loopback stack")
    samples, app = [], []
    for i in range(spec.runs_per_config):
        try:
            report = adapter.loopback_handshake(config, spec.payload)
        except TlsFitError as e:
            log.warning("%s: run %d failed: %s", config.label, i + 1, e)
            return ConfigStats.failed(config, ERROR, str(e))
        samples.append((report.up_bytes, report.down_bytes))
        app.append((report.app_up_bytes, report.app_down_bytes))
    return ConfigStats.of(config, samples, app)


def run_campaign(spec, adapter=None):
    """
    Run every configuration of ``spec``. ``adapter`` is the loopback stack,
    :mod:`tlsfit.stack` unless given. Loopback configurations always run one
    after the other.
    """
    if not spec.configs:
        raise ConfigurationError("campaign has no configurations")
    log.info("campaign: %d config(s) x %d run(s), %s backend", len(spec.configs),
             spec.runs_per_config, spec.backend)

    if spec.backend == 'model':
        if spec.workers > 1:
            with ThreadPoolExecutor(max_workers=spec.workers) as pool:
                stats = list(pool.map(lambda c: _model_stats(c, spec), spec.configs))
        else:
            stats = [_model_stats(c, spec) for c in spec.configs]
    else:
        if adapter is None:
            from . import stack as adapter
        stats = [_loopback_stats(c, spec, adapter) for c in spec.configs]

    return CampaignResult(backend=spec.backend, runs_per_config=spec.runs_per_config,
                          stats=tuple(stats))


def compare(result, group_by):
    """
    Pool the samples of completed configurations by signature scheme
    (``auth_mechanism``) or key exchange (``curve``) and return one row per
    group, cheapest first.
    """
    try:
        key = GROUPINGS[group_by]
    except KeyError:
        raise ValueError("unknown grouping '%s'" % group_by)

    groups = {}
    for s in result.completed():
        groups.setdefault(key(s.config), []).append(s)

    rows = []
    for name, members in groups.items():
        up = numpy.array([u for s in members for u in s.samples_up], dtype=float)
        down = numpy.array([d for s in members for d in s.samples_down], dtype=float)
        total = up + down
        rows.append(ComparisonRow(
            group=name, configs=len(members), samples=len(total),
            mean_up=float(up.mean()), mean_down=float(down.mean()),
            mean_total=float(total.mean()), stddev_total=float(total.std(ddof=0))))
    rows.sort(key=lambda r: (r.mean_total, r.group))
    return rows


COLUMNS = ('group', 'configs', 'samples', 'mean_up', 'mean_down', 'mean_total', 'stddev_total')


def _cells(row):
    return [row.group, row.configs, row.samples] + [
        '%.2f' % getattr(row, c) for c in COLUMNS[3:]]


def render_csv(rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator='\n')
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(_cells(r))
    return out.getvalue()


def render_text(rows):
    table = [list(COLUMNS)] + [[str(c) for c in _cells(r)] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(COLUMNS))]
    lines = []
    for line in table:
        cells = [line[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(line[1:], widths[1:])]
        lines.append('  '.join(cells).rstrip())
    return '\n'.join(lines) + '\n'


def render_dat(rows):
    """
    Whitespace separated columns for gnuplot bar charts, e.g.
    ``plot 'curve.dat' using 1:4:5:xtic(2) with boxerrorbars``.
    """
    lines = ["# index group mean_up mean_total stddev_total mean_down"]
    for i, r in enumerate(rows):
        lines.append("%d %s %.2f %.2f %.2f %.2f" % (
            i, r.group, r.mean_up, r.mean_total, r.stddev_total, r.mean_down))
    return '\n'.join(lines) + '\n'


def write_outputs(result, out_dir, group_by=tuple(GROUPINGS)):
    """
    Write ``result.json`` and, per grouping, ``compare_<group>.csv``,
    ``compare_<group>.txt`` and ``<group>.dat``. Returns the written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, 'result.json')
    documents.save(result, path)
    paths = [path]
    if isinstance(group_by, str):
        group_by = (group_by,)
    for g in group_by:
        rows = compare(result, g)
        for name, text in (('compare_%s.csv' % g, render_csv(rows)),
                           ('compare_%s.txt' % g, render_text(rows)),
                           ('%s.dat' % g, render_dat(rows))):
            path = os.path.join(out_dir, name)
            with open(path, 'w', encoding='utf-8') as f:
                f.write(text)
            paths.append(path)
    return paths
