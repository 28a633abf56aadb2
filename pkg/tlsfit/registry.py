"""
Registry of the algorithms tlsfit knows about: what kind of key exchange a
named group is, which security level an algorithm provides, which TLS version
a cipher suite belongs to. Byte sizes are not kept here, they live in the
size catalog of :mod:`tlsfit.costmodel`.

Security levels are given in the classical bit levels profiles use
(112, 128, 192, 256); algorithms in between are rounded down.
"""
from collections import namedtuple

Group = namedtuple('Group', 'name kind bits components openssl_name')
Signature = namedtuple('Signature', 'name family bits')
Suite = namedtuple('Suite', 'name version auth openssl_name')

CLASSICAL = 'classical'
PQ = 'pq'
HYBRID = 'hybrid'

SECURITY_LEVELS = (112, 128, 192, 256)

groups = {}
signatures = {}
suites = {}


def register_group(name, kind, bits, components=(), openssl_name=None):
    groups[name] = Group(name, kind, bits, tuple(components), openssl_name)


def register_signature(name, family, bits):
    signatures[name] = Signature(name, family, bits)


def register_suite(name, version, auth=None, openssl_name=None):
    suites[name] = Suite(name, version, auth, openssl_name or name)


def is_pq_group(name):
    g = groups.get(name)
    return g is not None and g.kind in (PQ, HYBRID)


def group_bits(name):
    """
    Classical bits a group contributes. A hybrid contributes the bits of its
    classical component.
    """
    g = groups[name]
    if g.kind == HYBRID:
        return min(groups[c].bits for c in g.components if groups[c].kind == CLASSICAL)
    return g.bits


def suite_accepts(suite_name, signature_name):
    """
    TLS1_2 suites fix the authentication algorithm, TLS1_3 suites don't.
    """
    suite = suites[suite_name]
    if suite.auth is None:
        return True
    family = signatures[signature_name].family
    if suite.auth == 'ecdsa':
        return family in ('ecdsa', 'eddsa')
    return family == suite.auth


def reset():
    """
    Forget every registration and restore the builtin algorithms.
    """
    groups.clear()
    signatures.clear()
    suites.clear()
    _register_builtins()


def _register_builtins():
    register_group('x25519', CLASSICAL, 128, openssl_name='X25519')
    register_group('x448', CLASSICAL, 192, openssl_name='X448')
    register_group('secp256r1', CLASSICAL, 128, openssl_name='prime256v1')
    register_group('secp384r1', CLASSICAL, 192, openssl_name='secp384r1')
    register_group('secp521r1', CLASSICAL, 256, openssl_name='secp521r1')
    register_group('brainpoolP256r1', CLASSICAL, 128)
    register_group('brainpoolP384r1', CLASSICAL, 192)
    register_group('brainpoolP512r1', CLASSICAL, 256)
    register_group('mlkem512', PQ, 128)
    register_group('mlkem768', PQ, 192)
    register_group('mlkem1024', PQ, 256)
    register_group('x25519_mlkem768_hybrid', HYBRID, 192, ('x25519', 'mlkem768'))
    register_group('secp256r1_mlkem768_hybrid', HYBRID, 192, ('secp256r1', 'mlkem768'))

    register_signature('ed25519', 'eddsa', 128)
    register_signature('ed448', 'eddsa', 192)
    register_signature('ecdsa_p256', 'ecdsa', 128)
    register_signature('ecdsa_p384', 'ecdsa', 192)
    register_signature('ecdsa_p521', 'ecdsa', 256)
    register_signature('rsa2048', 'rsa', 112)
    register_signature('rsa3072', 'rsa', 128)
    register_signature('rsa4096', 'rsa', 128)
    register_signature('mldsa44', 'mldsa', 128)
    register_signature('mldsa65', 'mldsa', 192)
    register_signature('mldsa87', 'mldsa', 256)

    register_suite('TLS_AES_128_GCM_SHA256', 'TLS1_3')
    register_suite('TLS_AES_256_GCM_SHA384', 'TLS1_3')
    register_suite('TLS_CHACHA20_POLY1305_SHA256', 'TLS1_3')
    register_suite('TLS_AES_128_CCM_SHA256', 'TLS1_3')
    register_suite('TLS_ECDHE_ECDSA_WITH_AES_128_GCM_SHA256', 'TLS1_2', 'ecdsa',
                   'ECDHE-ECDSA-AES128-GCM-SHA256')
    register_suite('TLS_ECDHE_ECDSA_WITH_AES_256_GCM_SHA384', 'TLS1_2', 'ecdsa',
                   'ECDHE-ECDSA-AES256-GCM-SHA384')
    register_suite('TLS_ECDHE_ECDSA_WITH_CHACHA20_POLY1305_SHA256', 'TLS1_2', 'ecdsa',
                   'ECDHE-ECDSA-CHACHA20-POLY1305')
    register_suite('TLS_ECDHE_RSA_WITH_AES_128_GCM_SHA256', 'TLS1_2', 'rsa',
                   'ECDHE-RSA-AES128-GCM-SHA256')
    register_suite('TLS_ECDHE_RSA_WITH_AES_256_GCM_SHA384', 'TLS1_2', 'rsa',
                   'ECDHE-RSA-AES256-GCM-SHA384')
    register_suite('TLS_ECDHE_RSA_WITH_CHACHA20_POLY1305_SHA256', 'TLS1_2', 'rsa',
                   'ECDHE-RSA-CHACHA20-POLY1305')


_register_builtins()
