"""
The analytical handshake cost model. Given a :class:`~tlsfit.profiles.TlsConfig`
it lays out the handshake message by message and sizes every message from
two tables kept in an :class:`AlgoSizeCatalog`:

* algorithm sizes (key shares, signatures, suite tag and hash lengths), and
* a :class:`FramingTable` of the fixed parts of the messages (how many cipher
  suites and signature algorithms a ClientHello offers and so on). The
  defaults describe an OpenSSL 3 peer with tickets, SNI, middlebox
  compatibility mode and padding turned off, which is what the loopback
  adapter in :mod:`tlsfit.stack` sets up.

::

    catalog = builtin_catalog()
    t = estimate_transcript(config, catalog)
    for entry in t.entries:
        print(entry.message_name, entry.direction, entry.total_bytes)
    total_bytes(t) # (up, down)
    apply_transport_overhead(t, 'tcp_ipv4') # with TCP/IPv4 headers

Record overhead is charged per record. A message longer than
``max_fragment`` is split over several records.
"""
import csv
import logging

from . import documents, registry
from .errors import CatalogMiss, ParseError
from .profiles import CertChainSpec, OverheadVector, Profile, security_level
from .record import Record
from .validators import Enum, Integer, ListOf, MapOf, Nested, Text

__all__ = [
    'SuiteSizes',
    'FramingTable',
    'AlgoSizeCatalog',
    'TranscriptEntry',
    'HandshakeTranscript',
    'TRANSPORT_MODES',
    'builtin_catalog',
    'load_catalog',
    'check_catalog',
    'estimate_transcript',
    'total_bytes',
    'apply_transport_overhead',
    'app_record_bytes',
    'sample_chain',
    'model_profile',
    'transcript_csv',
]

log = logging.getLogger(__name__)

UP = 'up'
DOWN = 'down'
TRANSPORT_MODES = ('none', 'tcp_ipv4')

DEFAULT_MSS = 1400
TCP_IPV4_HEADER = 40


class SuiteSizes(Record):
    aead_tag = Integer(minimum=1)
    explicit_nonce = Integer(minimum=0, optional=True, default_value=0)
    hash_len = Integer(minimum=1)


class FramingTable(Record):
    """
    Fixed message framing. Counts are numbers of entries offered, not bytes.
    """
    record_header = Integer(minimum=1, optional=True, default_value=5)
    handshake_header = Integer(minimum=1, optional=True, default_value=4)
    max_fragment = Integer(minimum=1, optional=True, default_value=16384)
    random = Integer(minimum=1, optional=True, default_value=32)
    tls13_client_suites = Integer(minimum=1, optional=True, default_value=4)
    tls12_client_suites = Integer(minimum=1, optional=True, default_value=2)
    tls13_client_sigalgs = Integer(minimum=1, optional=True, default_value=14)
    tls12_client_sigalgs = Integer(minimum=1, optional=True, default_value=20)
    tls13_server_sigalgs = Integer(minimum=1, optional=True, default_value=16)
    tls12_server_sigalgs = Integer(minimum=1, optional=True, default_value=20)
    ec_point_formats = Integer(minimum=1, optional=True, default_value=3)
    empty_client_extensions = Integer(minimum=0, optional=True, default_value=2)
    tls12_session_id = Integer(minimum=0, optional=True, default_value=32)
    tls12_cert_types = Integer(minimum=1, optional=True, default_value=3)
    tls12_verify_data = Integer(minimum=1, optional=True, default_value=12)
    psk_identity = Integer(minimum=1, optional=True, default_value=192)


class AlgoSizeCatalog(Record):
    """
    Byte sizes of everything algorithm dependent::

        groups:     name => (client key share, server key share)
        signatures: name => (max signature, public key)
        suites:     name => SuiteSizes

    A catalog document may be partial; :func:`load_catalog` merges it onto
    the builtin catalog.
    """
    groups = MapOf(ListOf(Integer(minimum=1)), optional=True)
    signatures = MapOf(ListOf(Integer(minimum=1)), optional=True)
    suites = MapOf(Nested(SuiteSizes), optional=True)
    framing = Nested(FramingTable, optional=True)

    @classmethod
    def check_fields(cls, values):
        errors = {}
        for field in ('groups', 'signatures'):
            bad = sorted(k for k, v in (values.get(field) or {}).items() if len(v) != 2)
            if bad:
                errors[field] = "expected two sizes for %s" % ', '.join(bad)
        return errors


    def keyshare(self, group):
        try:
            return tuple((self.groups or {})[group])
        except KeyError:
            raise CatalogMiss('group', group)


    def signature(self, scheme):
        try:
            return tuple((self.signatures or {})[scheme])
        except KeyError:
            raise CatalogMiss('signature', scheme)


    def suite(self, name):
        try:
            return (self.suites or {})[name]
        except KeyError:
            raise CatalogMiss('cipher_suite', name)


    def merged(self, override):
        """
        A new catalog with the entries of ``override`` replacing ours.
        """
        def merge(a, b):
            out = dict(a or {})
            out.update(b or {})
            return out
        return AlgoSizeCatalog(
            groups=merge(self.groups, override.groups),
            signatures=merge(self.signatures, override.signatures),
            suites=merge(self.suites, override.suites),
            framing=override.framing or self.framing)


class TranscriptEntry(Record):
    message_name = Text(minlength=1)
    direction = Enum(UP, DOWN)
    handshake_body_bytes = Integer(minimum=0)
    record_overhead_bytes = Integer(minimum=0)

    @property
    def total_bytes(self):
        return self.handshake_body_bytes + self.record_overhead_bytes


class HandshakeTranscript(Record):
    entries = ListOf(Nested(TranscriptEntry))
    up_bytes = Integer(minimum=0)
    down_bytes = Integer(minimum=0)

    @classmethod
    def of(cls, entries):
        entries = tuple(entries)
        return cls(entries=entries,
                   up_bytes=sum(e.total_bytes for e in entries if e.direction == UP),
                   down_bytes=sum(e.total_bytes for e in entries if e.direction == DOWN))


    @classmethod
    def check_fields(cls, values):
        errors = {}
        for field, direction in (('up_bytes', UP), ('down_bytes', DOWN)):
            expected = sum(e.total_bytes for e in values['entries'] if e.direction == direction)
            if values[field] != expected:
                errors[field] = "total %d does not match the entries (%d)" % (values[field], expected)
        return errors


    def messages(self, direction=None):
        return [e.message_name for e in self.entries
                if direction is None or e.direction == direction]


# Published parameter sizes. EC points are uncompressed, ECDSA signatures are
# at their DER maximum.
BUILTIN_GROUPS = {
    'x25519': (32, 32),
    'x448': (56, 56),
    'secp256r1': (65, 65),
    'secp384r1': (97, 97),
    'secp521r1': (133, 133),
    'brainpoolP256r1': (65, 65),
    'brainpoolP384r1': (97, 97),
    'brainpoolP512r1': (129, 129),
    'mlkem512': (800, 768),
    'mlkem768': (1184, 1088),
    'mlkem1024': (1568, 1568),
    'x25519_mlkem768_hybrid': (1216, 1120),
    'secp256r1_mlkem768_hybrid': (1249, 1153),
}

BUILTIN_SIGNATURES = {
    'ed25519': (64, 32),
    'ed448': (114, 57),
    'ecdsa_p256': (72, 65),
    'ecdsa_p384': (104, 97),
    'ecdsa_p521': (139, 133),
    'rsa2048': (256, 270),
    'rsa3072': (384, 398),
    'rsa4096': (512, 526),
    'mldsa44': (2420, 1312),
    'mldsa65': (3309, 1952),
    'mldsa87': (4627, 2592),
}

BUILTIN_SUITES = {
    'TLS_AES_128_GCM_SHA256': dict(aead_tag=16, hash_len=32),
    'TLS_AES_256_GCM_SHA384': dict(aead_tag=16, hash_len=48),
    'TLS_CHACHA20_POLY1305_SHA256': dict(aead_tag=16, hash_len=32),
    'TLS_AES_128_CCM_SHA256': dict(aead_tag=16, hash_len=32),
    'TLS_ECDHE_ECDSA_WITH_AES_128_GCM_SHA256': dict(aead_tag=16, explicit_nonce=8, hash_len=32),
    'TLS_ECDHE_ECDSA_WITH_AES_256_GCM_SHA384': dict(aead_tag=16, explicit_nonce=8, hash_len=48),
    'TLS_ECDHE_ECDSA_WITH_CHACHA20_POLY1305_SHA256': dict(aead_tag=16, hash_len=32),
    'TLS_ECDHE_RSA_WITH_AES_128_GCM_SHA256': dict(aead_tag=16, explicit_nonce=8, hash_len=32),
    'TLS_ECDHE_RSA_WITH_AES_256_GCM_SHA384': dict(aead_tag=16, explicit_nonce=8, hash_len=48),
    'TLS_ECDHE_RSA_WITH_CHACHA20_POLY1305_SHA256': dict(aead_tag=16, hash_len=32),
}

# DER sizes of the self-signed certificates in tlsfit/fixtures. Schemes
# without a fixture are public key + signature + 232 bytes of metadata (the
# ed25519 fixture's 220 bytes plus longer DER length fields).
SAMPLE_CERT_SIZES = {
    'ed25519': 316,
    'ecdsa_p256': 380,
    'ecdsa_p384': 441,
    'ecdsa_p521': 517,
    'rsa2048': 777,
    'ed448': 391,
    'rsa3072': 1033,
    'rsa4096': 1289,
    'mldsa44': 3964,
    'mldsa65': 5493,
    'mldsa87': 7451,
}


def builtin_catalog():
    return AlgoSizeCatalog(
        groups=dict(BUILTIN_GROUPS),
        signatures=dict(BUILTIN_SIGNATURES),
        suites=dict((k, SuiteSizes(**v)) for k, v in BUILTIN_SUITES.items()),
        framing=FramingTable())


def check_catalog(catalog):
    """
    Return the violations of a catalog as strings: sizes must be positive
    pairs and hybrid groups must be the sum of their components.
    """
    violations = []
    for field in ('groups', 'signatures'):
        for name, sizes in sorted((getattr(catalog, field) or {}).items()):
            if len(sizes) != 2 or any(s <= 0 for s in sizes):
                violations.append("%s.%s: sizes must be two positive numbers" % (field, name))

    groups = catalog.groups or {}
    for name, sizes in sorted(groups.items()):
        g = registry.groups.get(name)
        if g is None or g.kind != registry.HYBRID:
            continue
        if not all(c in groups for c in g.components):
            violations.append("groups.%s: missing component(s) %s" % (
                name, ', '.join(c for c in g.components if c not in groups)))
            continue
        expected = tuple(sum(groups[c][i] for c in g.components) for i in (0, 1))
        if tuple(sizes) != expected:
            violations.append("groups.%s: hybrid sizes %s are not the component sums %s" % (
                name, tuple(sizes), expected))
    return violations


def load_catalog(path):
    """
    Load a (possibly partial) catalog document and merge it onto the builtin
    catalog.
    """
    override = documents.load(path, AlgoSizeCatalog)
    catalog = builtin_catalog().merged(override)
    violations = check_catalog(catalog)
    if violations:
        raise ParseError(str(path), '; '.join(violations))
    return catalog


class _Layout(object):
    """
    Collects transcript entries for one handshake, charging record overhead
    according to the version and whether encryption is on yet.
    """

    def __init__(self, config, catalog):
        self.framing = catalog.framing or FramingTable()
        self.suite = catalog.suite(config.cipher_suite)
        self.tls13 = config.version == 'TLS1_3'
        self.entries = []


    def records(self, body):
        return max(1, -(-body // self.framing.max_fragment))


    def plain(self, name, direction, body):
        f = self.framing
        length = f.handshake_header + body
        self.entries.append(TranscriptEntry(
            message_name=name, direction=direction, handshake_body_bytes=length,
            record_overhead_bytes=self.records(length) * f.record_header))


    def encrypted(self, name, direction, body):
        f = self.framing
        length = f.handshake_header + body
        if self.tls13:
            per_record = f.record_header + 1 + self.suite.aead_tag
        else:
            per_record = f.record_header + self.suite.explicit_nonce + self.suite.aead_tag
        self.entries.append(TranscriptEntry(
            message_name=name, direction=direction, handshake_body_bytes=length,
            record_overhead_bytes=self.records(length) * per_record))


    def change_cipher_spec(self, direction):
        self.entries.append(TranscriptEntry(
            message_name='ChangeCipherSpec', direction=direction, handshake_body_bytes=1,
            record_overhead_bytes=self.framing.record_header))


def _ext(body):
    return 4 + body


def _tls13_client_hello(f, suite, ks_client, psk):
    exts = (_ext(1 + f.ec_point_formats) +      # ec_point_formats
            _ext(2 + 2) +                       # supported_groups
            4 * f.empty_client_extensions +     # encrypt_then_mac, extended_master_secret
            _ext(2 + 2 * f.tls13_client_sigalgs) +
            _ext(1 + 2) +                       # supported_versions
            _ext(1 + 1) +                       # psk_key_exchange_modes
            _ext(2 + 2 + 2 + ks_client))        # key_share
    if psk:
        exts += _ext(2 + 2 + f.psk_identity + 4 + 2 + 1 + suite.hash_len)
    return 2 + f.random + 1 + 2 + 2 * f.tls13_client_suites + 2 + 2 + exts


def _tls13_server_hello(f, ks_server, psk):
    exts = _ext(2) + _ext(2 + 2 + ks_server)
    if psk:
        exts += _ext(2)
    return 2 + f.random + 1 + 2 + 1 + 2 + exts


def _tls13_certificate(sizes):
    return 1 + 3 + sum(3 + s + 2 for s in sizes)


def _tls13(config, catalog, layout):
    f = layout.framing
    ks_client, ks_server = catalog.keyshare(config.key_exchange)
    psk = config.resumption == 'psk_resumption'

    layout.plain('ClientHello', UP, _tls13_client_hello(f, layout.suite, ks_client, psk))
    layout.plain('ServerHello', DOWN, _tls13_server_hello(f, ks_server, psk))
    layout.encrypted('EncryptedExtensions', DOWN, 2)
    if psk:
        layout.encrypted('Finished', DOWN, layout.suite.hash_len)
        layout.encrypted('Finished', UP, layout.suite.hash_len)
        return

    sig, _ = catalog.signature(config.signature_scheme)
    sizes = config.cert_chain.cert_sizes
    if config.mutual_auth:
        layout.encrypted('CertificateRequest', DOWN, 1 + 2 + _ext(2 + 2 * f.tls13_server_sigalgs))
    layout.encrypted('Certificate', DOWN, _tls13_certificate(sizes))
    layout.encrypted('CertificateVerify', DOWN, 2 + 2 + sig)
    layout.encrypted('Finished', DOWN, layout.suite.hash_len)
    if config.mutual_auth:
        layout.encrypted('Certificate', UP, _tls13_certificate(sizes))
        layout.encrypted('CertificateVerify', UP, 2 + 2 + sig)
    layout.encrypted('Finished', UP, layout.suite.hash_len)


def _tls12_client_hello(f, session_id):
    exts = (_ext(1 + f.ec_point_formats) +
            _ext(2 + 2) +
            4 * f.empty_client_extensions +
            _ext(2 + 2 * f.tls12_client_sigalgs))
    return 2 + f.random + 1 + session_id + 2 + 2 * f.tls12_client_suites + 2 + 2 + exts


def _tls12_server_hello(f):
    # renegotiation_info, extended_master_secret, ec_point_formats
    exts = _ext(1) + _ext(0) + _ext(1 + f.ec_point_formats)
    return 2 + f.random + 1 + f.tls12_session_id + 2 + 1 + 2 + exts


def _tls12_certificate(sizes):
    return 3 + sum(3 + s for s in sizes)


def _tls12(config, catalog, layout):
    f = layout.framing
    ks_client, ks_server = catalog.keyshare(config.key_exchange)
    verify = f.tls12_verify_data

    if config.resumption == 'psk_resumption':
        layout.plain('ClientHello', UP, _tls12_client_hello(f, f.tls12_session_id))
        layout.plain('ServerHello', DOWN, _tls12_server_hello(f))
        layout.change_cipher_spec(DOWN)
        layout.encrypted('Finished', DOWN, verify)
        layout.change_cipher_spec(UP)
        layout.encrypted('Finished', UP, verify)
        return

    sig, _ = catalog.signature(config.signature_scheme)
    sizes = config.cert_chain.cert_sizes
    layout.plain('ClientHello', UP, _tls12_client_hello(f, 0))
    layout.plain('ServerHello', DOWN, _tls12_server_hello(f))
    layout.plain('Certificate', DOWN, _tls12_certificate(sizes))
    layout.plain('ServerKeyExchange', DOWN, 1 + 2 + 1 + ks_server + 2 + 2 + sig)
    if config.mutual_auth:
        layout.plain('CertificateRequest', DOWN,
                     1 + f.tls12_cert_types + 2 + 2 * f.tls12_server_sigalgs + 2)
    layout.plain('ServerHelloDone', DOWN, 0)
    if config.mutual_auth:
        layout.plain('Certificate', UP, _tls12_certificate(sizes))
    layout.plain('ClientKeyExchange', UP, 1 + ks_client)
    if config.mutual_auth:
        layout.plain('CertificateVerify', UP, 2 + 2 + sig)
    layout.change_cipher_spec(UP)
    layout.encrypted('Finished', UP, verify)
    layout.change_cipher_spec(DOWN)
    layout.encrypted('Finished', DOWN, verify)


def estimate_transcript(config, catalog=None):
    """
    Lay out the handshake ``config`` performs. Raises
    :class:`~tlsfit.errors.CatalogMiss` naming the first identifier the
    catalog has no sizes for.
    """
    catalog = catalog or builtin_catalog()
    layout = _Layout(config, catalog)
    if layout.tls13:
        _tls13(config, catalog, layout)
    else:
        _tls12(config, catalog, layout)
    t = HandshakeTranscript.of(layout.entries)
    log.debug("%s: %d up, %d down over %d messages", config.label, t.up_bytes, t.down_bytes,
              len(t.entries))
    return t


def total_bytes(t):
    return (t.up_bytes, t.down_bytes)


def apply_transport_overhead(t, mode='none', mss=DEFAULT_MSS):
    """
    Per-direction bytes including transport overhead. ``tcp_ipv4`` charges a
    40 byte header for every MSS-sized segment plus the connection
    establishment (two segments up, one down)::

        apply_transport_overhead(t, 'none') == total_bytes(t)
    """
    up, down = total_bytes(t)
    if mode == 'none':
        return (up, down)
    if mode != 'tcp_ipv4':
        raise ValueError("unknown transport mode '%s'" % mode)
    up_segments = -(-up // mss) + 2
    down_segments = -(-down // mss) + 1
    return (up + TCP_IPV4_HEADER * up_segments, down + TCP_IPV4_HEADER * down_segments)


def app_record_bytes(config, payload_bytes, catalog=None):
    """
    Bytes on the wire for one application message sent in its own record.
    """
    catalog = catalog or builtin_catalog()
    f = catalog.framing or FramingTable()
    suite = catalog.suite(config.cipher_suite)
    if config.version == 'TLS1_3':
        return f.record_header + payload_bytes + 1 + suite.aead_tag
    return f.record_header + suite.explicit_nonce + payload_bytes + suite.aead_tag


def sample_chain(signature_scheme):
    """
    The builtin single self-signed certificate chain for a signature scheme.
    """
    try:
        size = SAMPLE_CERT_SIZES[signature_scheme]
    except KeyError:
        raise CatalogMiss('signature', signature_scheme)
    return CertChainSpec(chain_length=1, cert_sizes=(size,), leaf_key_algorithm=signature_scheme)


def model_profile(config, catalog=None, transport='none', profile_id=None):
    """
    A profile whose handshake bytes come from the model and whose security
    level comes from the algorithm registry.
    """
    t = estimate_transcript(config, catalog)
    up, down = apply_transport_overhead(t, transport)
    try:
        security = security_level(config)
    except KeyError as e:
        raise CatalogMiss('algorithm', e.args[0])
    return Profile(
        id=profile_id or config.profile_id,
        config=config,
        overhead=OverheadVector(handshake_bytes_up=up, handshake_bytes_down=down),
        security=security)


def transcript_csv(t, f):
    """
    Write ``message_name, direction, bytes`` rows to an open text file.
    """
    w = csv.writer(f, lineterminator='\n')
    w.writerow(['message_name', 'direction', 'bytes'])
    for e in t.entries:
        w.writerow([e.message_name, e.direction, e.total_bytes])
