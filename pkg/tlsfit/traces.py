"""
Observation traces: CSV files with the columns ``timestamp_ms, goodput_bps,
per, rssi_dbm``. Empty cells mean "not observed". The simulator writes them,
the monitor replays them.
"""
import csv

from .errors import ParseError
from .monitor import LinkObservation
from .validators import InvalidError

__all__ = ['TRACE_COLUMNS', 'TraceReader', 'read_trace', 'write_trace']

TRACE_COLUMNS = ('timestamp_ms', 'goodput_bps', 'per', 'rssi_dbm')


class TraceReader(object):
    """
    Wraps a :class:`csv.DictReader` and hands out
    :class:`~tlsfit.monitor.LinkObservation` records instead of dicts.
    Anything else is passed through to the reader::

        with open('trace.csv') as f:
            reader = TraceReader(f, source='trace.csv')
            for obs in reader:
                ...
            reader.line_num
    """

    def __init__(self, f, source='<trace>'):
        self._source = source
        self._reader = csv.DictReader(f)
        missing = [c for c in TRACE_COLUMNS if c not in (self._reader.fieldnames or ())]
        if missing:
            raise ParseError(source, "missing column(s): %s" % ', '.join(missing),
                             [(c, 'missing column') for c in missing])


    def _inst(self, row):
        data = {}
        for k in TRACE_COLUMNS:
            cell = (row.get(k) or '').strip()
            if not cell:
                continue
            try:
                data[k] = float(cell)
            except ValueError:
                raise ParseError(self._source, "line %d: %s: not a number" % (
                    self._reader.line_num, k), [(k, 'not a number')])
        try:
            return LinkObservation.from_dict(data)
        except InvalidError as e:
            fields = list(e.flatten()) if hasattr(e, 'flatten') else []
            raise ParseError(self._source, "line %d: %s" % (
                self._reader.line_num, '; '.join("%s: %s" % f for f in fields) or e), fields)


    def __getattr__(self, name):
        return getattr(self._reader, name)


    def __iter__(self):
        for row in self._reader:
            yield self._inst(row)


    def __next__(self):
        return self._inst(next(self._reader))


def read_trace(path):
    with open(path, newline='', encoding='utf-8') as f:
        return list(TraceReader(f, source=str(path)))


def write_trace(observations, f):
    w = csv.writer(f, lineterminator='\n')
    w.writerow(TRACE_COLUMNS)
    for obs in observations:
        w.writerow(['' if getattr(obs, k) is None else _cell(getattr(obs, k))
                    for k in TRACE_COLUMNS])


def _cell(value):
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value
