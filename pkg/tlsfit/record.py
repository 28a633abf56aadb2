"""
Records are the value objects every tlsfit module passes around: TLS
configurations, profiles, constraint snapshots, simulator scenarios. Fields
are declared with validators as class attributes, the same way the fields of a
persistent model are declared. Other than the validator fields, records are
regular python classes and may carry whatever methods and properties they want.

Unlike a persistent model, a record is immutable once built. Use
:meth:`Record.replace` to derive a changed copy.
"""
from .validators import Validator, GroupValidator, InvalidGroupError, InvalidError

__all__ = ['Record']


class RecordMeta(type):
    def __init__(cls, name, bases, namespace):
        super().__init__(name, bases, namespace)

        fields = {}
        for b in reversed(cls.__mro__[1:]):
            fields.update(getattr(b, '_fields', None) or {})
        for k, v in namespace.items():
            if isinstance(v, Validator):
                fields[k] = v
        cls._fields = fields


class Record(metaclass=RecordMeta):
    """
    A class with immutable, validated instances::

        class CertChainSpec(Record):
            chain_length = Integer(minimum=1)
            cert_sizes = ListOf(Integer(minimum=1))
            leaf_key_algorithm = Text(minlength=1)

        chain = CertChainSpec.from_dict({
            'chain_length': 1, 'cert_sizes': [800], 'leaf_key_algorithm': 'ed25519'})
        chain.cert_sizes # (800,)
        chain.to_dict() # {'chain_length': 1, 'cert_sizes': [800], ...}

        # construction does not validate, validate() and from_dict() do
        bad = CertChainSpec(chain_length=0, cert_sizes=(), leaf_key_algorithm='ed25519')
        bad.validate() # raises InvalidGroupError
    """
    _fields = {}

    def __init__(self, **kwargs):
        unknown = [k for k in kwargs if k not in self._fields]
        if unknown:
            raise TypeError("%s got unexpected field(s): %s" % (
                self.__class__.__name__, ', '.join(sorted(unknown))))

        for k, v in self._fields.items():
            value = kwargs[k] if k in kwargs else v.default_value
            if isinstance(value, list):
                value = tuple(value)
            object.__setattr__(self, k, value)


    @classmethod
    def from_dict(cls, data):
        """
        Strictly parse a dict (as read from a JSON document) into a record.
        Unknown keys, missing required keys and invalid values all raise
        :class:`~tlsfit.validators.InvalidGroupError`.
        """
        values = GroupValidator(strict=True, **cls._fields).validate(data)
        errors = cls.check_fields(values)
        if errors:
            raise InvalidGroupError(
                dict((k, InvalidError(v)) for k, v in errors.items()))
        return cls(**values)


    @classmethod
    def check_fields(cls, values):
        """
        Cross-field checks run after the per-field validators passed. Returns a
        dict of `field => message`; override in subclasses.
        """
        return {}


    def validate(self):
        """
        Run validation on all fields and the cross-field checks.
        """
        values = GroupValidator(**self._fields).validate(self.values())
        errors = self.check_fields(values)
        if errors:
            raise InvalidGroupError(
                dict((k, InvalidError(v)) for k, v in errors.items()))
        return values


    def values(self):
        return dict((k, getattr(self, k)) for k in self._fields)


    def to_dict(self):
        return dict((k, _plain(getattr(self, k))) for k in self._fields)


    def replace(self, **changes):
        values = self.values()
        values.update(changes)
        return self.__class__(**values)


    def __setattr__(self, name, value):
        raise AttributeError("%s records are immutable; use replace()" % self.__class__.__name__)


    def __eq__(self, other):
        if other.__class__ is not self.__class__:
            return NotImplemented
        return self._key() == other._key()


    def __hash__(self):
        return hash((self.__class__.__name__, self._key()))


    def __repr__(self):
        return "%s(%s)" % (
            self.__class__.__name__,
            ', '.join("%s=%r" % (k, getattr(self, k)) for k in self._fields))


    def _key(self):
        return tuple(_frozen(getattr(self, k)) for k in self._fields)


def _plain(value):
    if isinstance(value, Record):
        return value.to_dict()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return dict((k, _plain(v)) for k, v in value.items())
    return value


def _frozen(value):
    if isinstance(value, (list, tuple)):
        return tuple(_frozen(v) for v in value)
    if isinstance(value, dict):
        return tuple(sorted((k, _frozen(v)) for k, v in value.items()))
    return value
