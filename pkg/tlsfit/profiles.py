"""
TLS configuration profiles and the profile store.

A :class:`Profile` bundles a :class:`TlsConfig` with what it costs
(:class:`OverheadVector`) and what it buys (:class:`SecurityLevel`). Profiles
are generated once, in a pre-processing step, and kept in a
:class:`ProfileStore` that the selector searches at run time::

    store = load_store('profiles.json')
    for profile in store:
        print(profile.id, profile.total_bytes, validate_profile(profile))

Stores are immutable; :func:`prune_dominated` and friends return new stores.
"""
import logging

from . import documents, registry
from .errors import DuplicateIdError
from .record import Record
from .validators import (Bool, Enum, Integer, InvalidError, InvalidGroupError,
                         ListOf, Nested, Number, Text)

__all__ = [
    'CertChainSpec',
    'TlsConfig',
    'OverheadVector',
    'SecurityLevel',
    'Profile',
    'ProfileStore',
    'validate_profile',
    'security_level',
    'dominates',
    'prune_dominated',
    'load_store',
    'save_store',
]

log = logging.getLogger(__name__)

VERSIONS = ('TLS1_2', 'TLS1_3')
RESUMPTION_MODES = ('none', 'psk_resumption')


class CertChainSpec(Record):
    """
    The certificates one peer sends, leaf first. Only the encoded sizes
    matter here; certificates are never generated from this spec.
    """
    chain_length = Integer(minimum=1)
    cert_sizes = ListOf(Integer(minimum=1), min_items=1)
    leaf_key_algorithm = Text(minlength=1)

    @classmethod
    def check_fields(cls, values):
        if values['chain_length'] != len(values['cert_sizes']):
            return {'chain_length': "chain_length %d does not match %d cert_sizes entries" % (
                values['chain_length'], len(values['cert_sizes']))}
        return {}


    @property
    def total_bytes(self):
        return sum(self.cert_sizes)


class TlsConfig(Record):
    version = Enum(*VERSIONS)
    key_exchange = Text(minlength=1)
    signature_scheme = Text(minlength=1)
    cipher_suite = Text(minlength=1)
    mutual_auth = Bool()
    resumption = Enum(*RESUMPTION_MODES, optional=True, default_value='none')
    cert_chain = Nested(CertChainSpec)

    @property
    def label(self):
        """
        A short human readable name, e.g. ``TLS1_3/x25519/ed25519/mutual``.
        """
        parts = [self.version, self.key_exchange, self.signature_scheme,
                 'mutual' if self.mutual_auth else 'server-auth']
        if self.resumption != 'none':
            parts.append(self.resumption)
        return '/'.join(parts)


    @property
    def profile_id(self):
        """
        The id model-generated profiles get. Unique per distinct config.
        """
        return "%s:%s:%dB" % (self.label, self.cipher_suite, self.cert_chain.total_bytes)


class OverheadVector(Record):
    """
    Optional dimensions stay ``None`` when nothing measured them.
    """
    handshake_bytes_up = Integer(minimum=0)
    handshake_bytes_down = Integer(minimum=0)
    est_cpu_ms = Number(minimum=0, optional=True)
    est_mem_kb = Number(minimum=0, optional=True)
    est_energy_mj = Number(minimum=0, optional=True)

    @property
    def total_bytes(self):
        return self.handshake_bytes_up + self.handshake_bytes_down


class SecurityLevel(Record):
    classical_bits = Integer(choices=registry.SECURITY_LEVELS)
    pq_secure = Bool()

    @property
    def rank(self):
        """
        ``(pq_secure, classical_bits)``, the order profiles are ranked by.
        """
        return (self.pq_secure, self.classical_bits)


class Profile(Record):
    id = Text(minlength=1)
    config = Nested(TlsConfig)
    overhead = Nested(OverheadVector)
    security = Nested(SecurityLevel)

    @property
    def total_bytes(self):
        return self.overhead.total_bytes


    @property
    def rank(self):
        return self.security.rank


class ProfileStore(Record):
    """
    An ordered, immutable collection of profiles. Profiles are kept sorted by
    id and ids must be unique::

        store = ProfileStore.of([b, a])
        [p.id for p in store] # ['a', 'b']
        store.get('a') # a
        ProfileStore.of([a, a]) # raises DuplicateIdError
    """
    schema_version = Integer(minimum=1)
    profiles = ListOf(Nested(Profile))

    def __init__(self, **kwargs):
        profiles = sorted(kwargs.get('profiles') or (), key=lambda p: p.id)
        for a, b in zip(profiles, profiles[1:]):
            if a.id == b.id:
                raise DuplicateIdError('<store>', "duplicate profile id '%s'" % a.id,
                                       [('profiles', "duplicate id '%s'" % a.id)])
        kwargs['profiles'] = tuple(profiles)
        super().__init__(**kwargs)
        object.__setattr__(self, '_by_id', dict((p.id, p) for p in profiles))


    @classmethod
    def of(cls, profiles, schema_version=documents.SCHEMA_VERSION):
        return cls(schema_version=schema_version, profiles=profiles)


    def get(self, profile_id):
        return self._by_id.get(profile_id)


    def ids(self):
        return [p.id for p in self.profiles]


    def __iter__(self):
        return iter(self.profiles)


    def __len__(self):
        return len(self.profiles)


    def __contains__(self, profile_id):
        return profile_id in self._by_id


def validate_profile(p):
    """
    Return every invariant violation of a profile as a list of strings; an
    empty list means the profile is valid. Never raises::

        validate_profile(tls12_mlkem_profile) # ['PQ group requires TLS1_3']
    """
    if not isinstance(p, Profile):
        return ["not a profile: %r" % (p,)]
    try:
        p.validate()
    except InvalidGroupError as e:
        return ["%s: %s" % f for f in e.flatten()]
    except InvalidError as e:
        return [str(e)]

    violations = []
    config = p.config
    kex, sig, suite = config.key_exchange, config.signature_scheme, config.cipher_suite

    if kex not in registry.groups:
        violations.append("unknown key_exchange '%s'" % kex)
    elif registry.is_pq_group(kex) and config.version != 'TLS1_3':
        violations.append("PQ group requires TLS1_3")

    if sig not in registry.signatures:
        violations.append("unknown signature_scheme '%s'" % sig)
    elif registry.signatures[sig].family == 'mldsa' and config.version != 'TLS1_3':
        violations.append("ML-DSA signature requires TLS1_3")

    if suite not in registry.suites:
        violations.append("unknown cipher_suite '%s'" % suite)
    elif registry.suites[suite].version != config.version:
        violations.append("cipher_suite %s is not valid for %s" % (suite, config.version))
    elif sig in registry.signatures and not registry.suite_accepts(suite, sig):
        violations.append("cipher_suite %s cannot authenticate with %s" % (suite, sig))

    if config.cert_chain.leaf_key_algorithm != sig:
        violations.append("cert_chain leaf_key_algorithm '%s' does not match signature_scheme '%s'" % (
            config.cert_chain.leaf_key_algorithm, sig))

    if p.security.pq_secure and not registry.is_pq_group(kex):
        violations.append("pq_secure requires PQ/hybrid group")

    return violations


def security_level(config):
    """
    The security level a config provides: the weaker of key exchange and
    signature, and PQ security iff the key exchange is PQ or hybrid.
    Raises KeyError for algorithms the registry doesn't know.
    """
    bits = min(registry.group_bits(config.key_exchange),
               registry.signatures[config.signature_scheme].bits)
    level = max(l for l in registry.SECURITY_LEVELS if l <= bits)
    return SecurityLevel(classical_bits=level, pq_secure=registry.is_pq_group(config.key_exchange))


def dominates(p, q):
    """
    True if profile ``p`` is at least as secure as ``q`` in both security
    dimensions, needs no more handshake bytes, and is strictly better in at
    least one of the three.
    """
    ps, qs = p.security, q.security
    no_worse = (ps.pq_secure >= qs.pq_secure and
                ps.classical_bits >= qs.classical_bits and
                p.total_bytes <= q.total_bytes)
    better = (ps.pq_secure > qs.pq_secure or
              ps.classical_bits > qs.classical_bits or
              p.total_bytes < q.total_bytes)
    return no_worse and better


def prune_dominated(store):
    """
    Drop every profile some other profile dominates. Dominance is a strict
    partial order, so at least one profile of a non-empty store survives.
    """
    kept = [q for q in store if not any(dominates(p, q) for p in store if p is not q)]
    if len(kept) < len(store):
        log.info("pruned %d dominated profile(s), %d left", len(store) - len(kept), len(kept))
    return ProfileStore.of(kept, schema_version=store.schema_version)


def load_store(path):
    return documents.load(path, ProfileStore)


def save_store(store, path):
    documents.save(store, path)
