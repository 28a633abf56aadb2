"""
Exceptions raised by tlsfit. Everything derives from :class:`TlsFitError` so
callers can catch the whole family in one place.
"""

__all__ = [
    'TlsFitError',
    'ConfigurationError',
    'ValidationError',
    'ParseError',
    'SchemaError',
    'DuplicateIdError',
    'CatalogMiss',
    'OrderingError',
    'NotReadyError',
    'NoFeasibleProfile',
    'CapabilityError',
    'ProtocolError',
    'MismatchError',
]


class TlsFitError(Exception):
    pass


class ConfigurationError(TlsFitError):
    """
    A record violates its invariants, e.g. a link with zero capacity.
    """


class ValidationError(TlsFitError):
    """
    Input parsed but describes something invalid. ``violations`` maps a
    location (e.g. ``configs[2]``) to its list of violations.
    """

    def __init__(self, violations):
        self.violations = dict(violations)
        super().__init__("validation failed:\n" + '\n'.join(
            "  %s: %s" % (where, v) for where, vs in sorted(self.violations.items()) for v in vs))


class ParseError(TlsFitError):
    """
    A document could not be parsed. ``fields`` lists ``(path, message)``
    pairs naming every offending field.
    """

    def __init__(self, source, message, fields=()):
        self.source = source
        self.message = message
        self.fields = list(fields)
        super().__init__("%s: %s" % (source, message))


class SchemaError(ParseError):
    pass


class DuplicateIdError(SchemaError):
    pass


class CatalogMiss(TlsFitError):

    def __init__(self, kind, identifier):
        self.kind = kind
        self.identifier = identifier
        super().__init__("no catalog entry for %s '%s'" % (kind, identifier))


class OrderingError(TlsFitError):
    pass


class NotReadyError(TlsFitError):
    pass


class NoFeasibleProfile(TlsFitError):
    """
    No profile of the store satisfies the constraints. ``violations`` maps each
    profile id to ``(constraint_name, detail)`` for its tightest violated
    constraint.
    """

    def __init__(self, violations):
        self.violations = dict(violations)
        super().__init__("no feasible profile:\n" + '\n'.join(
            "  %s: %s (%s)" % (pid, name, detail)
            for pid, (name, detail) in sorted(self.violations.items())))


class CapabilityError(TlsFitError):
    pass


class ProtocolError(TlsFitError):
    pass


class MismatchError(TlsFitError):
    """
    The stack negotiated something other than what was requested. The
    offending report is kept on ``report``.
    """

    def __init__(self, report, message):
        self.report = report
        super().__init__(message)
