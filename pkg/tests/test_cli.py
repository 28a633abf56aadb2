"""
Unit tests for the command line and trace replay
"""
import contextlib
import io
import json
import os
import shutil
import tempfile
import unittest

from tlsfit import cli, documents
from tlsfit.bench import CampaignSpec
from tlsfit.cli import *
from tlsfit.costmodel import model_profile
from tlsfit.monitor import (AppMetadata, DerivationPolicy, LinkObservation, MetadataSchedule,
                            ScheduledMetadata)
from tlsfit.profiles import ProfileStore, load_store, save_store
from tlsfit.selector import CONSTRAINT_CHANGE, INITIAL, OVERLOAD_FALLBACK, SelectionResult, select
from tlsfit.traces import write_trace
from tlsfit.version import __version__

from tests.factories import config, profile


def matrix_entry(version='TLS1_3', kex='x25519', sig='ed25519', suite='TLS_AES_128_GCM_SHA256',
                 mutual=True):
    return {'version': version, 'key_exchange': kex, 'signature_scheme': sig,
            'cipher_suite': suite, 'mutual_auth': mutual}


def pq_store():
    classical = model_profile(config())
    pq = model_profile(config(kex='x25519_mlkem768_hybrid'))
    return ProfileStore.of([classical, pq]), classical.id, pq.id


def observations(pers, goodput=80000):
    return [LinkObservation(timestamp_ms=1000 * i, goodput_bps=goodput, per=per)
            for i, per in enumerate(pers)]


NORMAL = MetadataSchedule.constant(AppMetadata(urgency='normal', min_security_bits=128))


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()


    def tearDown(self):
        shutil.rmtree(self.dir)


    def path(self, name):
        return os.path.join(self.dir, name)


    def write_json(self, name, data):
        with open(self.path(name), 'w') as f:
            json.dump(data, f)
        return self.path(name)


    def main(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = cli.main(list(argv))
        return code, out.getvalue(), err.getvalue()


class TestUsage(CliTestCase):

    def test_usage_error(self):
        """
        Unknown or missing commands should exit 2
        """
        self.assertEqual(EXIT_USAGE, self.main('bogus')[0])
        self.assertEqual(EXIT_USAGE, self.main()[0])
        self.assertEqual(EXIT_USAGE, self.main('select', '--store', 'x')[0])


    def test_version(self):
        """
        --version should print the version and exit 0
        """
        code, out, _ = self.main('--version')
        self.assertEqual(EXIT_OK, code)
        self.assertIn(__version__, out)


    def test_missing_file(self):
        """
        A file that doesn't exist is a runtime error
        """
        code, _, err = self.main('profiles', 'validate', '--store', self.path('nope.json'))
        self.assertEqual(EXIT_RUNTIME, code)
        self.assertTrue(err.startswith('error:'))


class TestProfiles(CliTestCase):

    def test_generate_one(self):
        """
        One config should give a store with its modeled profile
        """
        matrix = self.write_json('matrix.json', {'configs': [matrix_entry()]})
        code, out, _ = self.main('profiles', 'generate', '--matrix', matrix,
                                 '--out', self.path('store.json'))
        self.assertEqual(EXIT_OK, code)
        self.assertIn('wrote 1 profile(s)', out)
        store = load_store(self.path('store.json'))
        self.assertEqual([model_profile(config())], list(store))


    def test_generate_prunes(self):
        """
        Dominated configs should be left out unless asked to keep them
        """
        matrix = self.write_json('matrix.json', {'configs': [
            matrix_entry(kex='secp256r1'), matrix_entry()]})
        self.assertEqual(EXIT_OK, self.main('profiles', 'generate', '--matrix', matrix,
                                            '--out', self.path('a.json'))[0])
        self.assertEqual(['x25519'], [p.config.key_exchange for p in load_store(self.path('a.json'))])

        self.assertEqual(EXIT_OK, self.main('profiles', 'generate', '--matrix', matrix,
                                            '--keep-dominated', '--out', self.path('b.json'))[0])
        self.assertEqual(2, len(load_store(self.path('b.json'))))


    def test_generate_invalid(self):
        """
        A PQ group under TLS1_2 should fail validation and write nothing
        """
        matrix = self.write_json('matrix.json', {'configs': [
            matrix_entry(),
            matrix_entry(version='TLS1_2', kex='mlkem768', sig='ecdsa_p256',
                         suite='TLS_ECDHE_ECDSA_WITH_AES_128_GCM_SHA256')]})
        code, _, err = self.main('profiles', 'generate', '--matrix', matrix,
                                 '--out', self.path('store.json'))
        self.assertEqual(EXIT_VALIDATION, code)
        self.assertIn('configs[1]', err)
        self.assertFalse(os.path.exists(self.path('store.json')))


    def test_generate_parse_errors(self):
        """
        Malformed JSON and unknown fields should exit 3 naming the field
        """
        with open(self.path('bad.json'), 'w') as f:
            f.write('{"configs": [')
        self.assertEqual(EXIT_PARSE, self.main('profiles', 'generate', '--matrix',
                                               self.path('bad.json'), '--out', self.path('s.json'))[0])

        entry = dict(matrix_entry(), curve='x25519')
        matrix = self.write_json('matrix.json', {'configs': [entry]})
        code, _, err = self.main('profiles', 'generate', '--matrix', matrix,
                                 '--out', self.path('s.json'))
        self.assertEqual(EXIT_PARSE, code)
        self.assertIn('configs[0].curve', err)


    def test_validate(self):
        """
        A valid store passes, one with an inconsistent profile exits 4
        """
        save_store(ProfileStore.of([model_profile(config())]), self.path('ok.json'))
        code, out, _ = self.main('profiles', 'validate', '--store', self.path('ok.json'))
        self.assertEqual(EXIT_OK, code)
        self.assertIn(': ok', out)

        bad = profile('bad').replace(config=config())
        bad = bad.replace(security=bad.security.replace(pq_secure=True))
        save_store(ProfileStore.of([bad]), self.path('bad.json'))
        code, out, _ = self.main('profiles', 'validate', '--store', self.path('bad.json'))
        self.assertEqual(EXIT_VALIDATION, code)
        self.assertIn('pq_secure requires PQ/hybrid group', out)


class TestTranscript(CliTestCase):

    def test_transcript(self):
        """
        Should write the modeled messages as CSV
        """
        path = self.path('config.json')
        documents.save(config(), path)
        code, _, _ = self.main('transcript', '--config', path, '--out', self.path('t.csv'))
        self.assertEqual(EXIT_OK, code)
        with open(self.path('t.csv')) as f:
            lines = f.read().splitlines()
        self.assertGreater(len(lines), 5)
        self.assertTrue(any('ClientHello' in l for l in lines))


class TestSelect(CliTestCase):

    def setUp(self):
        super().setUp()
        self.store, self.classical, self.pq = pq_store()
        save_store(self.store, self.path('store.json'))


    def test_select(self):
        """
        A feasible constraint set should exit 0 and write the selection
        """
        constraints = self.write_json('c.json', {'min_security_bits': 128,
                                                 'max_handshake_bytes': 50000})
        code, out, _ = self.main('select', '--store', self.path('store.json'),
                                 '--constraints', constraints, '--out', self.path('out'))
        self.assertEqual(EXIT_OK, code)
        result = documents.load(self.path('out/selection.json'), SelectionResult)
        self.assertEqual(self.pq, result.chosen)
        self.assertEqual(INITIAL, result.reason)
        self.assertTrue(os.path.exists(self.path('out/explain.txt')))


    def test_infeasible(self):
        """
        Nothing fitting the budget should exit 5 with an explanation
        """
        constraints = self.write_json('c.json', {'schema_version': 1, 'min_security_bits': 128,
                                                 'max_handshake_bytes': 1000})
        code, out, _ = self.main('select', '--store', self.path('store.json'),
                                 '--constraints', constraints, '--out', self.path('out'))
        self.assertEqual(EXIT_INFEASIBLE, code)
        self.assertIn('max_handshake_bytes', out)
        self.assertFalse(os.path.exists(self.path('out/selection.json')))


    def test_newer_schema(self):
        """
        Documents from a newer schema version should be refused
        """
        constraints = self.write_json('c.json', {'schema_version': 99, 'min_security_bits': 128})
        self.assertEqual(EXIT_PARSE, self.main('select', '--store', self.path('store.json'),
                                               '--constraints', constraints)[0])


class TestReplay(CliTestCase):

    def test_constant_trace(self):
        """
        A constant trace should select exactly once
        """
        store, _, pq = pq_store()
        save_store(store, self.path('store.json'))
        with open(self.path('trace.csv'), 'w', newline='') as f:
            write_trace(observations([0.0] * 10), f)
        meta = self.write_json('meta.json', {'urgency': 'normal', 'min_security_bits': 128})

        code, out, _ = self.main('replay', '--store', self.path('store.json'),
                                 '--trace', self.path('trace.csv'), '--meta', meta,
                                 '--out', self.path('out'))
        self.assertEqual(EXIT_OK, code)
        self.assertIn('1 selection(s), 0 switch(es)', out)
        timeline = documents.load(self.path('out/timeline.json'), ReplayTimeline)
        self.assertEqual(1, len(timeline.entries))
        self.assertEqual(pq, timeline.entries[0].result.chosen)


    def test_empty_store(self):
        """
        Replaying against an empty store is a configuration error
        """
        save_store(ProfileStore.of([]), self.path('store.json'))
        with open(self.path('trace.csv'), 'w', newline='') as f:
            write_trace(observations([0.0]), f)
        meta = self.write_json('meta.json', {'urgency': 'normal', 'min_security_bits': 128})
        self.assertEqual(EXIT_VALIDATION, self.main(
            'replay', '--store', self.path('store.json'), '--trace', self.path('trace.csv'),
            '--meta', meta)[0])


    def test_infinite_goodput(self):
        """
        A trace with an infinite goodput is a parse error, not a crash
        """
        store, _, _ = pq_store()
        save_store(store, self.path('store.json'))
        with open(self.path('trace.csv'), 'w') as f:
            f.write("timestamp_ms,goodput_bps,per,rssi_dbm\n0,inf,0,\n")
        meta = self.write_json('meta.json', {'urgency': 'normal', 'min_security_bits': 128})
        code, _, err = self.main('replay', '--store', self.path('store.json'),
                                 '--trace', self.path('trace.csv'), '--meta', meta)
        self.assertEqual(EXIT_PARSE, code)
        self.assertIn('goodput_bps', err)


    def test_all_infeasible(self):
        """
        A replay where nothing is ever feasible should exit 5
        """
        store, _, _ = pq_store()
        save_store(store, self.path('store.json'))
        with open(self.path('trace.csv'), 'w', newline='') as f:
            write_trace(observations([0.0] * 3, goodput=800), f)
        meta = self.write_json('meta.json', {'urgency': 'urgent', 'min_security_bits': 128})
        self.assertEqual(EXIT_INFEASIBLE, self.main(
            'replay', '--store', self.path('store.json'), '--trace', self.path('trace.csv'),
            '--meta', meta)[0])


class TestReplayTimeline(unittest.TestCase):

    def setUp(self):
        self.store, self.classical, self.pq = pq_store()
        # three clean seconds, five at 20% loss, then clean again
        self.timeline = replay(self.store, observations([0.0] * 3 + [0.2] * 5 + [0.0] * 6), NORMAL)


    def test_overload_fallback(self):
        """
        Sustained loss should fall back to classical and recover to PQ
        """
        chosen = [e.result.chosen for e in self.timeline.entries]
        deduped = [c for i, c in enumerate(chosen) if i == 0 or c != chosen[i - 1]]
        self.assertEqual([self.pq, self.classical, self.pq], deduped)
        self.assertEqual(2, self.timeline.switches())
        self.assertEqual(0, self.timeline.infeasible_steps())

        fallback = [e for e in self.timeline.entries if e.result.chosen == self.classical]
        self.assertEqual(7000, fallback[0].timestamp_ms)
        self.assertTrue(all(e.result.reason == OVERLOAD_FALLBACK for e in fallback))
        self.assertTrue(all(e.constraints.overload for e in fallback))
        recovered = [e for e in self.timeline.entries if e.timestamp_ms > fallback[-1].timestamp_ms]
        self.assertEqual(11000, recovered[0].timestamp_ms)
        self.assertEqual(CONSTRAINT_CHANGE, recovered[0].result.reason)


    def test_reverifiable(self):
        """
        Selecting again from each entry's constraints should give its result
        """
        prev = None
        for e in self.timeline.entries:
            self.assertEqual(e.result, select(self.store, e.constraints, prev))
            prev = e.result.chosen


    def test_selects_on_change(self):
        """
        Entries should only appear when the constraints changed
        """
        entries = self.timeline.entries
        self.assertEqual(INITIAL, entries[0].result.reason)
        self.assertEqual(0, entries[0].timestamp_ms)
        for a, b in zip(entries, entries[1:]):
            self.assertNotEqual(a.constraints, b.constraints)
            self.assertLess(a.timestamp_ms, b.timestamp_ms)


    def test_defer(self):
        """
        Background traffic should be deferred while the link is overloaded
        """
        schedule = MetadataSchedule.constant(AppMetadata(urgency='background', min_security_bits=128))
        timeline = replay(self.store, observations([0.0] * 3 + [0.2] * 5 + [0.0] * 6), schedule)
        for e in timeline.entries:
            self.assertEqual(e.constraints.overload, e.defer)
        self.assertTrue(any(e.defer for e in timeline.entries))


    def test_schedule(self):
        """
        A metadata change should relax the byte budget mid-trace
        """
        store = ProfileStore.of([profile('a', bits=128, up=500, down=500),
                                 profile('b', bits=192, up=1500, down=1500)])
        schedule = MetadataSchedule(entries=(
            ScheduledMetadata(from_ms=0, metadata=AppMetadata(urgency='urgent', min_security_bits=128)),
            ScheduledMetadata(from_ms=3000, metadata=AppMetadata(urgency='normal', min_security_bits=128))))
        timeline = replay(store, observations([0.0] * 6, goodput=8000), schedule)
        self.assertEqual([0, 3000], [e.timestamp_ms for e in timeline.entries])
        self.assertEqual(['a', 'b'], [e.result.chosen for e in timeline.entries])


    def test_infeasible_step(self):
        """
        A step with nothing feasible should be recorded and the last choice kept
        """
        store = ProfileStore.of([profile('a', bits=128, up=1000, down=1000)])
        obs = [LinkObservation(timestamp_ms=0, goodput_bps=16000),
               LinkObservation(timestamp_ms=1000, goodput_bps=800),
               LinkObservation(timestamp_ms=2000, goodput_bps=800000)]
        schedule = MetadataSchedule.constant(AppMetadata(urgency='urgent', min_security_bits=128))
        timeline = replay(store, obs, schedule, derivation=DerivationPolicy(alpha=1))
        self.assertEqual(1, timeline.infeasible_steps())
        self.assertIsNone(timeline.entries[1].result)
        self.assertEqual(['max_handshake_bytes', '2000 > 100'], list(timeline.entries[1].infeasible['a']))
        self.assertEqual('a', timeline.entries[2].result.prev)


    def test_budget_crossing(self):
        """
        A bandwidth drop crossing one profile's budget should switch at most
        twice
        """
        store = ProfileStore.of([profile('small', bits=128, up=1000, down=1000),
                                 profile('big', bits=192, up=4000, down=4000)])
        obs = [LinkObservation(timestamp_ms=1000 * i, goodput_bps=bw)
               for i, bw in enumerate([16000] * 5 + [12000] * 20)]
        timeline = replay(store, obs, NORMAL)
        self.assertLessEqual(timeline.switches(), 2)
        self.assertEqual('big', timeline.entries[0].result.chosen)
        self.assertEqual('small', timeline.entries[-1].result.chosen)


class TestSimulate(CliTestCase):

    def test_simulate(self):
        """
        Should write metrics and both traces
        """
        scenario = self.write_json('scenario.json', {
            'link': {'uplink_capacity': 64000, 'downlink_capacity': 64000, 'per': 0.05},
            'workload': {'n_devices': 4},
            'duration_ms': 5000})
        code, out, _ = self.main('simulate', '--scenario', scenario, '--seed', '7',
                                 '--out', self.path('out'))
        self.assertEqual(EXIT_OK, code)
        self.assertIn('transaction(s)', out)
        for name in ('metrics.json', 'transactions.csv', 'observations.csv'):
            self.assertTrue(os.path.exists(self.path(os.path.join('out', name))), name)


    def test_invalid_scenario(self):
        """
        A run shorter than one poll interval should exit 4
        """
        scenario = self.write_json('scenario.json', {
            'link': {'uplink_capacity': 64000, 'downlink_capacity': 64000},
            'workload': {'n_devices': 4},
            'duration_ms': 500})
        self.assertEqual(EXIT_VALIDATION, self.main('simulate', '--scenario', scenario)[0])


class TestMeasure(CliTestCase):

    def test_measure(self):
        """
        A model campaign should write its result and comparisons
        """
        spec = self.path('spec.json')
        documents.save(bench_spec(), spec)
        code, out, _ = self.main('measure', '--spec', spec, '--out', self.path('out'))
        self.assertEqual(EXIT_OK, code)
        self.assertIn('by curve:', out)
        for name in ('result.json', 'compare_curve.csv', 'compare_auth_mechanism.txt'):
            self.assertTrue(os.path.exists(self.path(os.path.join('out', name))), name)


def bench_spec():
    return CampaignSpec(configs=(config(), config(kex='secp384r1')), runs_per_config=3)
