"""
Unit tests for the profile selector
"""
import functools
import random
import unittest

from tlsfit.errors import ConfigurationError, NoFeasibleProfile
from tlsfit.monitor import ConstraintSet
from tlsfit.profiles import ProfileStore
from tlsfit.selector import *

from tests.factories import profile


BITS = (112, 128, 192, 256)
SIZES = (1000, 2000, 3000, 4000, 6000, 8000, 16000)
BUDGETS = (None, 2500, 5000, 9000, 20000)


def constraints(budget=None, bits=128, pq=False, overload=False):
    return ConstraintSet(max_handshake_bytes=budget, min_security_bits=bits, require_pq=pq,
                         overload=overload)


def abc():
    return ProfileStore.of([profile('A', 128, up=2000, down=2000),
                            profile('B', 128, pq=True, up=7500, down=7500),
                            profile('C', 192, up=3000, down=3000)])


def random_store(rng, n=None):
    n = rng.randint(1, 5) if n is None else n
    profiles = []
    for i in range(n):
        size = rng.choice(SIZES)
        profiles.append(profile('p%d' % i, rng.choice(BITS), rng.random() < 0.4,
                                up=size // 2, down=size - size // 2))
    return ProfileStore.of(profiles)


def random_constraints(rng):
    return constraints(rng.choice(BUDGETS), rng.choice(BITS[:3]), rng.random() < 0.2,
                       rng.random() < 0.2)


def compare(p, q):
    """
    Negative if p should be chosen over q.
    """
    if p.security.pq_secure != q.security.pq_secure:
        return -1 if p.security.pq_secure else 1
    if p.security.classical_bits != q.security.classical_bits:
        return q.security.classical_bits - p.security.classical_bits
    if p.total_bytes != q.total_bytes:
        return p.total_bytes - q.total_bytes
    return (p.id > q.id) - (p.id < q.id)


def brute_force(store, c, fallback=True):
    candidates = []
    for p in store:
        if p.security.classical_bits < c.min_security_bits:
            continue
        if c.require_pq and not p.security.pq_secure:
            continue
        if c.max_handshake_bytes is not None and p.total_bytes > c.max_handshake_bytes:
            continue
        if c.overload and fallback and p.security.pq_secure:
            continue
        candidates.append(p)
    if not candidates:
        return None
    return sorted(candidates, key=functools.cmp_to_key(compare))[0].id


def chosen_or_none(store, c, prev=None, policy=None):
    try:
        return select(store, c, prev, policy).chosen
    except NoFeasibleProfile:
        return None


class TestFeasible(unittest.TestCase):

    def test_security_floor(self):
        """
        A 128 bit profile shouldn't meet a 192 bit floor
        """
        self.assertFalse(feasible(profile('p', 128), constraints(bits=192)))
        self.assertTrue(feasible(profile('p', 192), constraints(bits=192)))


    def test_budget(self):
        """
        A 4000 byte profile should fit a 50000 byte budget, and a budget it
        meets exactly
        """
        p = profile('p', up=1500, down=2500)
        self.assertTrue(feasible(p, constraints(50000)))
        self.assertTrue(feasible(p, constraints(4000)))
        self.assertFalse(feasible(p, constraints(3999)))


    def test_require_pq(self):
        """
        A classical profile shouldn't meet a PQ requirement
        """
        self.assertFalse(feasible(profile('p'), constraints(pq=True)))
        self.assertTrue(feasible(profile('p', pq=True), constraints(pq=True)))


    def test_overload_ignored(self):
        """
        Overload is not a feasibility question
        """
        self.assertTrue(feasible(profile('p', pq=True), constraints(overload=True)))


class TestSelect(unittest.TestCase):

    def test_pq_preferred(self):
        """
        With room for it, the PQ profile should win
        """
        r = select(abc(), constraints(20000))
        self.assertEqual('B', r.chosen)
        self.assertEqual('initial', r.reason)
        self.assertEqual(('A', 'B', 'C'), r.feasible_set)


    def test_overload_fallback(self):
        """
        While overloaded the PQ profile should be excluded and the strongest
        classical profile chosen
        """
        r = select(abc(), constraints(20000, overload=True))
        self.assertEqual('C', r.chosen)
        self.assertEqual('overload_fallback', r.reason)
        self.assertEqual(('A', 'C'), r.feasible_set)

        r = select(abc(), constraints(20000, overload=True), policy=SelectionPolicy(overload_fallback=False))
        self.assertEqual('B', r.chosen)


    def test_not_opportunistic(self):
        """
        Without opportunistic PQ, security bits and bytes alone should rank
        """
        policy = SelectionPolicy(pq_opportunistic=False)
        self.assertEqual('C', select(abc(), constraints(20000), policy=policy).chosen)
        self.assertEqual('B', select(abc(), constraints(20000, pq=True), policy=policy).chosen)


    def test_singleton(self):
        """
        A single feasible profile should be chosen for the first time
        """
        store = ProfileStore.of([profile('p1')])
        r = select(store, constraints())
        self.assertEqual('p1', r.chosen)
        self.assertEqual('initial', r.reason)
        self.assertIsNone(r.prev)


    def test_empty_store(self):
        """
        Selecting from an empty store is a configuration error
        """
        self.assertRaises(ConfigurationError, select, ProfileStore.of([]), constraints())


    def test_no_feasible(self):
        """
        When nothing fits, the error should name the tightest violation of
        every profile
        """
        with self.assertRaises(NoFeasibleProfile) as cm:
            select(abc(), constraints(5000, bits=192, overload=True))
        v = cm.exception.violations
        self.assertEqual(['A', 'B', 'C'], sorted(v))
        self.assertEqual(('min_security_bits', '128 < 192'), v['A'])
        self.assertEqual('min_security_bits', v['B'][0])
        self.assertEqual(('max_handshake_bytes', '6000 > 5000'), v['C'])


    def test_violation_order(self):
        """
        PQ requirement before overload before budget
        """
        self.assertEqual('require_pq', violation(profile('p', up=9000), constraints(1000, pq=True))[0])
        self.assertEqual('overload', violation(profile('p', pq=True, up=9000),
                                               constraints(1000, overload=True))[0])
        self.assertIsNone(violation(profile('p'), constraints()))


    def test_constraint_change(self):
        """
        A new choice with a previous one should be a constraint change
        """
        r = select(abc(), constraints(9000), prev='B')
        self.assertEqual('C', r.chosen)
        self.assertEqual('constraint_change', r.reason)
        self.assertEqual('B', r.prev)


    def test_hysteresis_hold(self):
        """
        A feasible previous profile of the same rank should be kept while the
        saving is under the margin
        """
        store = ProfileStore.of([profile('cheap', up=2000, down=2000),
                                 profile('held', up=2400, down=2400)])
        r = select(store, constraints(10000), prev='held')
        self.assertEqual('held', r.chosen)
        self.assertEqual('hysteresis_hold', r.reason)
        self.assertEqual('cheap', r.candidate)

        r = select(store, constraints(10000), prev='held', policy=SelectionPolicy(switch_margin_bytes=800))
        self.assertEqual('cheap', r.chosen)

        r = select(store, constraints(4500), prev='held')
        self.assertEqual('cheap', r.chosen)
        self.assertEqual('constraint_change', r.reason)


    def test_unknown_prev(self):
        """
        A previous id the store doesn't know should not be held
        """
        r = select(abc(), constraints(20000), prev='gone')
        self.assertEqual('B', r.chosen)
        self.assertEqual('constraint_change', r.reason)


class TestSelectProperties(unittest.TestCase):

    def test_oracle(self):
        """
        Selection should agree with exhaustive enumeration over small stores
        """
        rng = random.Random(2)
        for i in range(10000):
            store = random_store(rng)
            c = random_constraints(rng)
            fallback = rng.random() < 0.8
            policy = SelectionPolicy(overload_fallback=fallback)
            self.assertEqual(brute_force(store, c, fallback), chosen_or_none(store, c, policy=policy),
                             "case %d: %r %r" % (i, store.ids(), c))


    def test_soundness(self):
        """
        The chosen profile should always be feasible and never an excluded PQ
        profile
        """
        rng = random.Random(3)
        for _ in range(1000):
            store = random_store(rng)
            c = random_constraints(rng)
            prev = rng.choice(store.ids() + [None])
            try:
                r = select(store, c, prev)
            except NoFeasibleProfile:
                continue
            p = store.get(r.chosen)
            self.assertTrue(feasible(p, c))
            self.assertIn(r.chosen, r.feasible_set)
            self.assertIsNone(violation(p, c))


    def test_determinism(self):
        """
        The same inputs should give the same result, whatever the order the
        store was built in
        """
        rng = random.Random(4)
        for _ in range(1000):
            store = random_store(rng)
            c = random_constraints(rng)
            prev = rng.choice(store.ids() + [None])
            shuffled = list(store)
            rng.shuffle(shuffled)
            try:
                r = select(store, c, prev)
            except NoFeasibleProfile:
                self.assertRaises(NoFeasibleProfile, select, ProfileStore.of(shuffled), c, prev)
                continue
            self.assertEqual(r, select(store, c, prev))
            self.assertEqual(r, select(ProfileStore.of(shuffled), c, prev))


    def test_scale_invariance(self):
        """
        Scaling every byte count and the budget alike should not change the
        choice
        """
        rng = random.Random(5)
        for _ in range(1000):
            store = random_store(rng)
            c = random_constraints(rng)
            k = rng.choice((2, 3, 10))
            scaled = ProfileStore.of([p.replace(overhead=p.overhead.replace(
                handshake_bytes_up=p.overhead.handshake_bytes_up * k,
                handshake_bytes_down=p.overhead.handshake_bytes_down * k)) for p in store])
            budget = None if c.max_handshake_bytes is None else c.max_handshake_bytes * k
            self.assertEqual(chosen_or_none(store, c),
                             chosen_or_none(scaled, c.replace(max_handshake_bytes=budget)))


    def test_budget_monotonic(self):
        """
        A bigger budget should never lower the rank of the choice
        """
        rng = random.Random(6)
        for _ in range(1000):
            store = random_store(rng)
            low, high = sorted(rng.sample(range(500, 20000, 500), 2))
            bits = rng.choice(BITS[:3])
            a = chosen_or_none(store, constraints(low, bits))
            b = chosen_or_none(store, constraints(high, bits))
            if a is None:
                continue
            self.assertIsNotNone(b)
            self.assertGreaterEqual(store.get(b).rank, store.get(a).rank)


    def test_switch_bound(self):
        """
        A feasible previous profile should only be left for a higher rank or a
        saving of at least the margin
        """
        rng = random.Random(7)
        for _ in range(1000):
            store = random_store(rng)
            c = random_constraints(rng)
            prev = rng.choice(store.ids())
            policy = SelectionPolicy(switch_margin_bytes=rng.choice((0, 500, 1000, 5000)))
            try:
                r = select(store, c, prev, policy)
            except NoFeasibleProfile:
                continue
            if r.chosen == prev or prev not in r.feasible_set:
                continue
            held, chosen = store.get(prev), store.get(r.chosen)
            self.assertTrue(chosen.rank > held.rank or
                            held.total_bytes - chosen.total_bytes >= policy.switch_margin_bytes)


    def test_oscillating_budget(self):
        """
        On a noisy budget, profiles of one rank should only switch when the
        held profile stops fitting
        """
        rng = random.Random(8)
        policy = SelectionPolicy(switch_margin_bytes=10 ** 6)
        for _ in range(1000):
            store = ProfileStore.of([profile('p%d' % i, 128, up=s // 2, down=s - s // 2)
                                     for i, s in enumerate(rng.sample(SIZES, 3))])
            prev, switches, traversals = None, 0, 0
            for _ in range(20):
                c = constraints(rng.choice((2500, 3500, 5000, 9000, 20000)))
                if prev is not None and not feasible(store.get(prev), c):
                    traversals += 1
                chosen = chosen_or_none(store, c, prev, policy)
                if chosen is None:
                    continue
                if prev is not None and chosen != prev:
                    switches += 1
                prev = chosen
            self.assertLessEqual(switches, traversals)


class TestExplain(unittest.TestCase):

    def test_budget_rejection(self):
        """
        A rejection by budget should name the constraint and both numbers
        """
        store, c = abc(), constraints(5000)
        text = explain(select(store, c), store, c)
        self.assertIn("chosen: A (initial)", text)
        line = [l for l in text.splitlines() if l.strip().startswith('B ')][0]
        self.assertIn("max_handshake_bytes", line)
        self.assertIn("15000", line)
        self.assertIn("5000", line)
        self.assertIn("A [classical 128 bits, 4000 bytes]: feasible, chosen", text)
        self.assertEqual(text, explain(select(store, c), store, c))


    def test_nothing_feasible(self):
        """
        Without a result every profile should be listed with its reason
        """
        store, c = abc(), constraints(1000, bits=192)
        text = explain(None, store, c)
        self.assertIn("chosen: none", text)
        self.assertEqual(3, text.count("rejected by"))


    def test_hold(self):
        """
        A hold should name the previous profile and the margin
        """
        store = ProfileStore.of([profile('cheap', up=2000, down=2000),
                                 profile('held', up=2400, down=2400)])
        c = constraints(10000)
        text = explain(select(store, c, 'held'), store, c)
        self.assertIn("holding held", text)
        self.assertIn("cheap would save 800 bytes", text)
        self.assertIn("switch_margin_bytes 1000", text)
