"""
The ``tlsfit`` command line.

Profiles are generated once from a matrix of configurations and then used at
run time by the selector; every other command runs one of the library's
operations on files::

    tlsfit profiles generate --matrix matrix.json --out profiles.json
    tlsfit profiles validate --store profiles.json
    tlsfit transcript --config config.json
    tlsfit select --store profiles.json --constraints constraints.json
    tlsfit replay --store profiles.json --trace trace.csv --meta meta.json --out replay/
    tlsfit simulate --scenario scenario.json --out sim/
    tlsfit measure --spec campaign.json --out bench/

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 parse or schema
error, 4 validation error, 5 when no profile was feasible.
"""
import argparse
import itertools
import json
import logging
import os
import sys

from . import bench, costmodel, documents, settings, simulator
from .errors import (ConfigurationError, NoFeasibleProfile, NotReadyError, ParseError,
                     TlsFitError, ValidationError)
from .monitor import (AppMetadata, DerivationPolicy, MetadataSchedule, MonitorState,
                      ConstraintSet, derive_constraints, ingest)
from .profiles import ProfileStore, TlsConfig, load_store, prune_dominated, save_store, \
    validate_profile
from .record import Record
from .selector import HYSTERESIS_HOLD, SelectionPolicy, SelectionResult, explain, select
from .traces import read_trace
from .validators import Bool, ListOf, MapOf, Nested, Number, Text
from .version import __version__

__all__ = [
    'EXIT_OK',
    'EXIT_RUNTIME',
    'EXIT_USAGE',
    'EXIT_PARSE',
    'EXIT_VALIDATION',
    'EXIT_INFEASIBLE',
    'ConfigMatrix',
    'TimelineEntry',
    'ReplayTimeline',
    'replay',
    'cmd_profiles_generate',
    'cmd_profiles_validate',
    'cmd_transcript',
    'cmd_select',
    'cmd_replay',
    'cmd_simulate',
    'cmd_measure',
    'main',
]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_INFEASIBLE = 5


class ConfigMatrix(Record):
    """
    Input of profile generation. Entries may leave out ``cert_chain``; they
    then get the builtin sample chain of their signature scheme.
    """
    configs = ListOf(Nested(TlsConfig), min_items=1)


class TimelineEntry(Record):
    timestamp_ms = Number(minimum=0)
    constraints = Nested(ConstraintSet)
    result = Nested(SelectionResult, optional=True)
    infeasible = MapOf(ListOf(Text()), optional=True)
    defer = Bool(optional=True, default_value=False)


class ReplayTimeline(Record):
    entries = ListOf(Nested(TimelineEntry))

    @classmethod
    def check_fields(cls, values):
        times = [e.timestamp_ms for e in values['entries']]
        if any(b <= a for a, b in zip(times, times[1:])):
            return {'entries': "timestamps must be strictly increasing"}
        return {}


    def switches(self):
        chosen = [e.result.chosen for e in self.entries if e.result is not None]
        return sum(1 for a, b in zip(chosen, chosen[1:]) if a != b)


    def holds(self):
        return sum(1 for e in self.entries
                   if e.result is not None and e.result.reason == HYSTERESIS_HOLD)


    def infeasible_steps(self):
        return sum(1 for e in self.entries if e.result is None)


def replay(store, observations, schedule, policy=None, derivation=None):
    """
    Feed observations through the monitor and select again whenever the
    derived constraints change. Observations sharing a timestamp are ingested
    together. A step where nothing is feasible is recorded and the replay goes
    on with the previous choice.
    """
    policy = policy or SelectionPolicy()
    state = MonitorState.initial(derivation)
    entries = []
    last = None
    prev = None

    for ts, group in itertools.groupby(observations, key=lambda o: o.timestamp_ms):
        for obs in group:
            state = ingest(state, obs)
        meta = schedule.at(ts)
        try:
            c = derive_constraints(state, meta)
        except NotReadyError:
            continue
        if c == last:
            continue
        last = c

        defer = c.overload and meta.urgency == 'background'
        try:
            result = select(store, c, prev, policy)
        except NoFeasibleProfile as e:
            log.info("%s ms: no feasible profile", ts)
            entries.append(TimelineEntry(
                timestamp_ms=ts, constraints=c, defer=defer,
                infeasible=dict((k, tuple(v)) for k, v in e.violations.items())))
            continue
        prev = result.chosen
        entries.append(TimelineEntry(timestamp_ms=ts, constraints=c, result=result, defer=defer))

    return ReplayTimeline(entries=tuple(entries))


def _load_json(path):
    with open(path, encoding='utf-8') as f:
        try:
            return json.load(f)
        except ValueError as e:
            raise ParseError(str(path), "malformed JSON: %s" % e)


def _out_path(out, name):
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def _write(path, text):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)


def _load_catalog(path):
    return costmodel.load_catalog(path) if path else costmodel.builtin_catalog()


def cmd_profiles_generate(args):
    data = _load_json(args.matrix)
    if isinstance(data, dict) and isinstance(data.get('configs'), list):
        for entry in data['configs']:
            if isinstance(entry, dict) and 'cert_chain' not in entry and \
                    isinstance(entry.get('signature_scheme'), str):
                try:
                    entry['cert_chain'] = costmodel.sample_chain(entry['signature_scheme']).to_dict()
                except TlsFitError:
                    pass
    matrix = documents.parse(data, ConfigMatrix, source=str(args.matrix))
    catalog = _load_catalog(args.catalog)

    profiles, violations = [], {}
    for i, config in enumerate(matrix.configs):
        where = "configs[%d]" % i
        try:
            profile = costmodel.model_profile(config, catalog, args.transport)
        except TlsFitError as e:
            violations[where] = [str(e)]
            continue
        v = validate_profile(profile)
        if v:
            violations[where] = v
        profiles.append(profile)
    if violations:
        raise ValidationError(violations)

    store = ProfileStore.of(profiles)
    if not args.keep_dominated:
        store = prune_dominated(store)
    save_store(store, args.out)
    print("wrote %d profile(s) to %s" % (len(store), args.out))
    return EXIT_OK


def cmd_profiles_validate(args):
    store = load_store(args.store)
    violations = dict((p.id, v) for p, v in ((p, validate_profile(p)) for p in store) if v)
    for p in store:
        print("%s: %s" % (p.id, '; '.join(violations[p.id]) if p.id in violations else 'ok'))
    if violations:
        raise ValidationError(violations)
    return EXIT_OK


def cmd_transcript(args):
    config = documents.load(args.config, TlsConfig)
    t = costmodel.estimate_transcript(config, _load_catalog(args.catalog))
    if args.out:
        with open(args.out, 'w', newline='', encoding='utf-8') as f:
            costmodel.transcript_csv(t, f)
    else:
        costmodel.transcript_csv(t, sys.stdout)
    up, down = costmodel.apply_transport_overhead(t, args.transport)
    log.info("%s: %d up, %d down (%s transport)", config.label, up, down, args.transport)
    return EXIT_OK


def _policy(args):
    return documents.load(args.policy, SelectionPolicy) if args.policy else SelectionPolicy()


def cmd_select(args):
    store = load_store(args.store)
    c = documents.load(args.constraints, ConstraintSet)
    policy = _policy(args)
    try:
        result = select(store, c, args.prev, policy)
    except NoFeasibleProfile:
        report = explain(None, store, c, policy)
        sys.stdout.write(report)
        if args.out:
            _write(_out_path(args.out, 'explain.txt'), report)
        return EXIT_INFEASIBLE

    report = explain(result, store, c, policy)
    sys.stdout.write(report)
    if args.out:
        documents.save(result, _out_path(args.out, 'selection.json'))
        _write(_out_path(args.out, 'explain.txt'), report)
    return EXIT_OK


def _load_schedule(path):
    data = _load_json(path)
    if isinstance(data, dict) and 'entries' in data:
        return documents.parse(data, MetadataSchedule, source=str(path))
    return MetadataSchedule.constant(documents.parse(data, AppMetadata, source=str(path)))


def cmd_replay(args):
    store = load_store(args.store)
    if not len(store):
        raise ConfigurationError("%s holds no profiles" % args.store)
    derivation = documents.load(args.derivation, DerivationPolicy) if args.derivation else None
    timeline = replay(store, read_trace(args.trace), _load_schedule(args.meta),
                      _policy(args), derivation)

    for e in timeline.entries:
        if e.result is None:
            print("%10.0f  no feasible profile" % e.timestamp_ms)
        else:
            print("%10.0f  %s (%s)%s" % (e.timestamp_ms, e.result.chosen, e.result.reason,
                                         ', defer' if e.defer else ''))
    print("%d selection(s), %d switch(es), %d hysteresis hold(s), %d infeasible" % (
        len(timeline.entries), timeline.switches(), timeline.holds(),
        timeline.infeasible_steps()))
    if args.out:
        documents.save(timeline, _out_path(args.out, 'timeline.json'))

    if timeline.entries and timeline.infeasible_steps() == len(timeline.entries):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_simulate(args):
    scenario = documents.load(args.scenario, simulator.Scenario)
    if args.seed is not None:
        scenario = scenario.replace(seed=args.seed)
    metrics = simulator.run_scenario(scenario)
    lat = metrics.latency
    if lat.count:
        print("%d transaction(s), latency ms: min %.1f p25 %.1f median %.1f p75 %.1f "
              "p95 %.1f max %.1f" % (lat.count, lat.min_ms, lat.p25_ms, lat.median_ms,
                                     lat.p75_ms, lat.p95_ms, lat.max_ms))
    else:
        print("no completed transactions")
    print("dropped %d, retransmissions %d" % (metrics.dropped_transactions,
                                               metrics.retransmissions))
    if args.out:
        documents.save(metrics, _out_path(args.out, 'metrics.json'))
        simulator.emit_trace(metrics, args.out)
    return EXIT_OK


def cmd_measure(args):
    spec = documents.load(args.spec, bench.CampaignSpec)
    result = bench.run_campaign(spec)
    for g in bench.GROUPINGS:
        print("by %s:" % g)
        sys.stdout.write(bench.render_text(bench.compare(result, g)))
    for s in result.stats:
        if s.status != 'ok':
            print("%s: %s (%s)" % (s.config.label, s.status, s.reason))
    if args.out:
        bench.write_outputs(result, args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog='tlsfit', description=__doc__.split('\n\n')[0])
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help="more log output (repeat for debug)")
    sub = parser.add_subparsers(dest='command', required=True)

    profiles = sub.add_parser('profiles', help="generate or validate a profile store")
    psub = profiles.add_subparsers(dest='profiles_command', required=True)
    p = psub.add_parser('generate', help="model a config matrix into a profile store")
    p.add_argument('--matrix', required=True)
    p.add_argument('--catalog')
    p.add_argument('--transport', choices=costmodel.TRANSPORT_MODES, default='none')
    p.add_argument('--keep-dominated', action='store_true')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_profiles_generate)
    p = psub.add_parser('validate', help="check every profile of a store")
    p.add_argument('--store', required=True)
    p.set_defaults(func=cmd_profiles_validate)

    p = sub.add_parser('transcript', help="dump the modeled handshake of a config as CSV")
    p.add_argument('--config', required=True)
    p.add_argument('--catalog')
    p.add_argument('--transport', choices=costmodel.TRANSPORT_MODES, default='none')
    p.add_argument('--out')
    p.set_defaults(func=cmd_transcript)

    p = sub.add_parser('select', help="select a profile for a constraint set")
    p.add_argument('--store', required=True)
    p.add_argument('--constraints', required=True)
    p.add_argument('--policy')
    p.add_argument('--prev')
    p.add_argument('--out')
    p.set_defaults(func=cmd_select)

    p = sub.add_parser('replay', help="replay an observation trace through monitor and selector")
    p.add_argument('--store', required=True)
    p.add_argument('--trace', required=True)
    p.add_argument('--meta', required=True)
    p.add_argument('--policy')
    p.add_argument('--derivation')
    p.add_argument('--out')
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser('simulate', help="run a link simulation scenario")
    p.add_argument('--scenario', required=True)
    p.add_argument('--seed', type=int)
    p.add_argument('--out')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('measure', help="run a measurement campaign")
    p.add_argument('--spec', required=True)
    p.add_argument('--out')
    p.set_defaults(func=cmd_measure)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    level = {0: settings.log_level, 1: 'INFO'}.get(args.verbose, 'DEBUG')
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')

    try:
        return args.func(args)
    except ParseError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_PARSE
    except (ValidationError, ConfigurationError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_VALIDATION
    except NoFeasibleProfile as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_INFEASIBLE
    except (TlsFitError, OSError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_RUNTIME
