"""
Real handshakes over loopback, for calibrating the cost model.

Client and server are two :class:`ssl.SSLObject` instances connected through
memory BIOs, so every byte either side writes passes through
:func:`loopback_handshake` and is counted there, below TLS and above any
transport. The contexts are configured to match the cost model's framing
table: one group, no session tickets, no SNI, no middlebox compatibility
mode and no ClientHello padding.

Certificates come from the fixture directory (see
:func:`tlsfit.settings.get_fixture_dir`), one self-signed certificate per
signature scheme::

    <fixture_dir>/<signature_scheme>/cert.pem
    <fixture_dir>/<signature_scheme>/key.pem

The packaged fixtures and their DER sizes are ed25519 316 B, ecdsa_p256
380 B, ecdsa_p384 441 B, ecdsa_p521 517 B and rsa2048 777 B.
"""
import datetime
import functools
import logging
import os
import ssl

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, ed448, ed25519, rsa
from cryptography.x509.oid import NameOID

from . import registry, settings
from .errors import CapabilityError, MismatchError, ProtocolError
from .profiles import CertChainSpec
from .record import Record
from .validators import Bool, Integer, Text

__all__ = [
    'LoopbackReport',
    'PayloadSpec',
    'supports',
    'loopback_handshake',
    'fixture_paths',
    'fixture_chain',
    'ensure_fixture',
]

log = logging.getLogger(__name__)

VERSIONS = {
    'TLS1_2': (ssl.TLSVersion.TLSv1_2, 'TLSv1.2'),
    'TLS1_3': (ssl.TLSVersion.TLSv1_3, 'TLSv1.3'),
}

# The ssl module can't restrict TLS1_3 suites; both peers offer OpenSSL's
# defaults and the server's first choice wins.
TLS13_SUITE = 'TLS_AES_256_GCM_SHA384'

OP_TLSEXT_PADDING = 0x10

KEY_FACTORIES = {
    'ed25519': lambda: ed25519.Ed25519PrivateKey.generate(),
    'ed448': lambda: ed448.Ed448PrivateKey.generate(),
    'ecdsa_p256': lambda: ec.generate_private_key(ec.SECP256R1()),
    'ecdsa_p384': lambda: ec.generate_private_key(ec.SECP384R1()),
    'ecdsa_p521': lambda: ec.generate_private_key(ec.SECP521R1()),
    'rsa2048': lambda: rsa.generate_private_key(public_exponent=65537, key_size=2048),
    'rsa3072': lambda: rsa.generate_private_key(public_exponent=65537, key_size=3072),
    'rsa4096': lambda: rsa.generate_private_key(public_exponent=65537, key_size=4096),
}

SIGNING_HASHES = {
    'ecdsa_p256': hashes.SHA256,
    'ecdsa_p384': hashes.SHA384,
    'ecdsa_p521': hashes.SHA512,
    'rsa2048': hashes.SHA256,
    'rsa3072': hashes.SHA256,
    'rsa4096': hashes.SHA256,
}


class PayloadSpec(Record):
    message_bytes = Integer(minimum=1, optional=True, default_value=128)
    message_count = Integer(minimum=0, optional=True, default_value=2)


class LoopbackReport(Record):
    up_bytes = Integer(minimum=0)
    down_bytes = Integer(minimum=0)
    app_up_bytes = Integer(minimum=0)
    app_down_bytes = Integer(minimum=0)
    version = Text()
    group = Text()
    cipher = Text()
    mismatched = Bool(optional=True, default_value=False)


def fixture_paths(scheme, fixture_dir=None):
    d = os.path.join(fixture_dir or settings.get_fixture_dir(), scheme)
    return os.path.join(d, 'cert.pem'), os.path.join(d, 'key.pem')


def _has_fixture(scheme, fixture_dir=None):
    return all(os.path.exists(p) for p in fixture_paths(scheme, fixture_dir))


@functools.lru_cache(maxsize=None)
def _group_available(openssl_name):
    # a group name OpenSSL parses may still be missing from this build
    try:
        ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT).set_ecdh_curve(openssl_name)
    except (ssl.SSLError, ValueError):
        return False
    return True


def supports(config, fixture_dir=None):
    """
    True if the loopback stack can run ``config`` exactly as requested.
    """
    group = registry.groups.get(config.key_exchange)
    suite = registry.suites.get(config.cipher_suite)
    if group is None or group.openssl_name is None or group.kind != registry.CLASSICAL:
        return False
    if not _group_available(group.openssl_name):
        return False
    if config.signature_scheme not in registry.signatures or suite is None:
        return False
    if suite.version != config.version or config.resumption != 'none':
        return False
    if config.version == 'TLS1_3' and config.cipher_suite != TLS13_SUITE:
        return False
    if not registry.suite_accepts(config.cipher_suite, config.signature_scheme):
        return False
    return _has_fixture(config.signature_scheme, fixture_dir)


def _contexts(config, fixture_dir):
    cert, key = fixture_paths(config.signature_scheme, fixture_dir)
    version, _ = VERSIONS[config.version]
    group = registry.groups[config.key_exchange]
    suite = registry.suites[config.cipher_suite]

    server = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
    client = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
    for ctx in (server, client):
        ctx.minimum_version = ctx.maximum_version = version
        ctx.options |= ssl.OP_NO_TICKET | ssl.OP_CIPHER_SERVER_PREFERENCE
        ctx.options &= ~(ssl.OP_ENABLE_MIDDLEBOX_COMPAT | OP_TLSEXT_PADDING)
        ctx.set_ecdh_curve(group.openssl_name)
        if config.version == 'TLS1_2':
            ctx.set_ciphers(suite.openssl_name)

    server.num_tickets = 0
    server.load_cert_chain(cert, key)
    client.check_hostname = False
    client.load_verify_locations(cafile=cert)
    if config.mutual_auth:
        server.verify_mode = ssl.CERT_REQUIRED
        server.load_verify_locations(cafile=cert)
        client.load_cert_chain(cert, key)
    return client, server


class _Pipe(object):
    """
    Moves bytes between the two memory BIO pairs and counts them.
    """

    def __init__(self):
        self.client_in, self.client_out = ssl.MemoryBIO(), ssl.MemoryBIO()
        self.server_in, self.server_out = ssl.MemoryBIO(), ssl.MemoryBIO()
        self.up = 0
        self.down = 0


    def pump(self):
        moved = False
        data = self.client_out.read()
        if data:
            self.up += len(data)
            self.server_in.write(data)
            moved = True
        data = self.server_out.read()
        if data:
            self.down += len(data)
            self.client_in.write(data)
            moved = True
        return moved


def _step(obj, op, *args):
    try:
        return True, getattr(obj, op)(*args)
    except (ssl.SSLWantReadError, ssl.SSLWantWriteError):
        return False, None
    except ssl.SSLError as e:
        raise ProtocolError("%s failed: %s" % (op, e))


def _handshake(client, server, pipe, max_rounds=64):
    client_done = server_done = False
    for _ in range(max_rounds):
        if not client_done:
            client_done, _ = _step(client, 'do_handshake')
        if not server_done:
            server_done, _ = _step(server, 'do_handshake')
        moved = pipe.pump()
        if client_done and server_done and not moved:
            return
    raise ProtocolError("handshake did not complete in %d rounds" % max_rounds)


def _read(obj, pipe, n, max_rounds=64):
    buf = b''
    for _ in range(max_rounds):
        done, data = _step(obj, 'read', n - len(buf))
        if done:
            buf += data
            if len(buf) >= n:
                return buf
        if not pipe.pump() and not done:
            break
    raise ProtocolError("expected %d application bytes, got %d" % (n, len(buf)))


def _negotiated_group(obj, requested):
    # the ssl module exposes the group only on newer versions; otherwise the
    # single configured group is the only one the handshake can have used
    group = getattr(obj, 'group', None)
    if callable(group):
        name = group()
        for g in registry.groups.values():
            if name in (g.name, g.openssl_name):
                return g.name
        return name or requested
    return requested


def loopback_handshake(config, payload=None, fixture_dir=None):
    """
    Run one handshake with ``config``, then send each application message of
    ``payload`` from client to server and echo it back. Byte counts are split
    into the handshake and application phases. Raises
    :class:`~tlsfit.errors.CapabilityError` for configs :func:`supports`
    rejects, :class:`~tlsfit.errors.ProtocolError` when the handshake fails
    and :class:`~tlsfit.errors.MismatchError` when the stack negotiated
    anything other than what was asked for.
    """
    payload = payload or PayloadSpec()
    if not supports(config, fixture_dir):
        raise CapabilityError("the loopback stack cannot run %s" % config.label)

    pipe = _Pipe()
    try:
        client_ctx, server_ctx = _contexts(config, fixture_dir)
        client = client_ctx.wrap_bio(pipe.client_in, pipe.client_out, server_side=False)
        server = server_ctx.wrap_bio(pipe.server_in, pipe.server_out, server_side=True)
    except ssl.SSLError as e:
        raise ProtocolError("setting up %s failed: %s" % (config.label, e))

    _handshake(client, server, pipe)
    up, down = pipe.up, pipe.down

    message = b'\x2a' * payload.message_bytes
    for _ in range(payload.message_count):
        _step(client, 'write', message)
        pipe.pump()
        _step(server, 'write', _read(server, pipe, len(message)))
        pipe.pump()
        _read(client, pipe, len(message))

    report = LoopbackReport(
        up_bytes=up, down_bytes=down,
        app_up_bytes=pipe.up - up, app_down_bytes=pipe.down - down,
        version=client.version() or '',
        group=_negotiated_group(client, config.key_exchange),
        cipher=(client.cipher() or ('',))[0])

    suite = registry.suites[config.cipher_suite]
    expected = (VERSIONS[config.version][1], config.key_exchange, suite.openssl_name)
    if (report.version, report.group, report.cipher) != expected:
        report = report.replace(mismatched=True)
        raise MismatchError(report, "requested %s, negotiated %s/%s/%s" % (
            config.label, report.version, report.group, report.cipher))

    log.debug("%s: %d up, %d down (+%d/%d application)", config.label, report.up_bytes,
              report.down_bytes, report.app_up_bytes, report.app_down_bytes)
    return report


def fixture_chain(scheme, fixture_dir=None):
    """
    The :class:`~tlsfit.profiles.CertChainSpec` of a fixture certificate, so
    that modeled and measured configs use the same certificate.
    """
    cert_path, _ = fixture_paths(scheme, fixture_dir)
    with open(cert_path, 'rb') as f:
        cert = x509.load_pem_x509_certificate(f.read())
    size = len(cert.public_bytes(serialization.Encoding.DER))
    return CertChainSpec(chain_length=1, cert_sizes=(size,), leaf_key_algorithm=scheme)


def ensure_fixture(scheme, fixture_dir=None):
    """
    Generate a self-signed fixture certificate for ``scheme`` unless one
    exists. Returns ``(cert_path, key_path)``.
    """
    cert_path, key_path = fixture_paths(scheme, fixture_dir)
    if os.path.exists(cert_path) and os.path.exists(key_path):
        return cert_path, key_path
    if scheme not in KEY_FACTORIES:
        raise CapabilityError("cannot generate a certificate for '%s'" % scheme)

    key = KEY_FACTORIES[scheme]()
    name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, 'tlsfit')])
    now = datetime.datetime.now(datetime.timezone.utc)
    builder = (x509.CertificateBuilder()
               .subject_name(name)
               .issuer_name(name)
               .public_key(key.public_key())
               .serial_number(x509.random_serial_number())
               .not_valid_before(now - datetime.timedelta(days=1))
               .not_valid_after(now + datetime.timedelta(days=36500))
               .add_extension(x509.SubjectKeyIdentifier.from_public_key(key.public_key()),
                              critical=False)
               .add_extension(x509.BasicConstraints(ca=True, path_length=None), critical=True))
    algorithm = SIGNING_HASHES.get(scheme)
    cert = builder.sign(key, algorithm() if algorithm else None)

    os.makedirs(os.path.dirname(cert_path), exist_ok=True)
    with open(key_path, 'wb') as f:
        f.write(key.private_bytes(serialization.Encoding.PEM,
                                  serialization.PrivateFormat.PKCS8,
                                  serialization.NoEncryption()))
    with open(cert_path, 'wb') as f:
        f.write(cert.public_bytes(serialization.Encoding.PEM))
    log.info("generated %s fixture in %s", scheme, os.path.dirname(cert_path))
    return cert_path, key_path
