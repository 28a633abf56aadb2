"""
This module provides the validation system used to parse every tlsfit document
(profile stores, catalogs, scenarios, campaign specs and so on).

Validators generally perform one task: check that a value meets a certain
specification. Sometimes they also perform a conversion. For instance, the
:class:`Nested` validator checks that a dict has the fields of a record and
converts it to an instance of that record.

Creating validators is straightforward. Subclass Validator and implement
the validate() method. Here is one that only passes even key share sizes::

    class EvenSize(Validator):
        NOT_EVEN = "Expected an even number of bytes"

        def validate(self, value):
            if not isinstance(value, int) or value % 2:
                raise InvalidError(self.NOT_EVEN)
            return value

It's a convention, but not a requirement, to put error values in the class
like above. Then we can do things based on the type of error::

    try:
        EvenSize().validate(65)
    except InvalidError as e:
        if str(e) == EvenSize.NOT_EVEN:
            print("odd point encoding")

Errors from a :class:`GroupValidator` are collected per key into an
:class:`InvalidGroupError`. Nested groups and lists nest their errors the same
way, and :meth:`InvalidGroupError.flatten` turns the nesting into field paths
such as ``profiles[1].config.version``.
"""
import math

__all__ = [
    'InvalidError',
    'InvalidGroupError',
    'Validator',
    'GroupValidator',
    'Text',
    'Bool',
    'Enum',
    'Integer',
    'Number',
    'ListOf',
    'MapOf',
    'Nested',
]


class InvalidError(Exception):
    """
    Raised by every validator for data it rejects. The message is one of the
    validator's message constants::

        try:
            Integer(minimum=1).validate(0)
        except InvalidError as e:
            log.warning("bad cert size: %s", e)
    """


class InvalidGroupError(InvalidError):
    """
    This exception represents a group of invalid errors. It takes a dict where
    the keys are the names (or list indexes) of items that were invalid and the
    values are the errors for their respective items::

        errors = {}
        for k, v in stuff.items():
            try:
                validator.validate(v)
            except InvalidError as e:
                errors[k] = e
        if errors:
            raise InvalidGroupError(errors)
    """

    def __init__(self, errors):
        self.errors = errors
        super().__init__(
            "Some errors were encountered\n" +
            '\n'.join("%s: %s" % (k, v) for k, v in self.flatten()))


    def flatten(self, prefix=''):
        """
        Yield ``(path, message)`` pairs for every leaf error::

            e = InvalidGroupError({'profiles': InvalidGroupError({1: InvalidError('Not a dict')})})
            list(e.flatten()) # [('profiles[1]', 'Not a dict')]
        """
        for k, v in self.errors.items():
            if isinstance(k, int):
                path = "%s[%d]" % (prefix, k)
            elif prefix:
                path = "%s.%s" % (prefix, k)
            else:
                path = str(k)
            if isinstance(v, InvalidGroupError):
                yield from v.flatten(path)
            else:
                yield path, str(v)


class Validator(object):
    """
    Base class. Subclasses implement ``validate(value)``, returning the
    (possibly converted) value.
    """

    def __init__(self, optional=False, default_value=None):
        self.optional = optional
        self.default_value = default_value


    def validate(self, value):
        raise NotImplementedError


class GroupValidator(Validator):
    """
    Validates a dict of `key => validator`::

        v = GroupValidator(group=Text(), bits=Integer())
        v.validate({'group': 'x25519', 'bits': 128}) # ok
        v.validate(5) # nope

        # unknown keys are dropped
        v.validate({'group': 'x25519', 'curve': 'x25519', 'bits': 128})
        # ok -> {'group': 'x25519', 'bits': 128}

        # ...unless the group is strict
        v = GroupValidator(strict=True, group=Text())
        v.validate({'group': 'x25519', 'curve': 'x25519'}) # nope, 'curve' is unknown

        # missing optional keys get their default
        v = GroupValidator(group=Text(), bits=Integer(optional=True, default_value=128))
        v.validate({'group': 'x448'}) # -> {'group': 'x448', 'bits': 128}
    """
    NOT_A_DICT = "Not a dict"
    MISSING_REQUIRED = "This field is required."
    UNKNOWN_FIELD = "Unknown field."

    def __init__(self, strict=False, **kwargs):
        newkwargs = {}
        for k in ('optional', 'default_value'):
            if k in kwargs:
                newkwargs[k] = kwargs.pop(k)

        Validator.__init__(self, **newkwargs)
        self.strict = strict
        self.validators = kwargs


    def validate(self, value):
        if not isinstance(value, dict):
            raise InvalidError(self.NOT_A_DICT)

        validated = {}
        errors = {}

        for k, v in self.validators.items():
            if k in value and value[k] is not None:
                try:
                    validated[k] = v.validate(value[k])
                except InvalidError as e:
                    errors[k] = e
            else:
                if not v.optional:
                    errors[k] = InvalidError(self.MISSING_REQUIRED)
                    continue
                validated[k] = v.default_value

        if self.strict:
            for k in value:
                if k not in self.validators:
                    errors[k] = InvalidError(self.UNKNOWN_FIELD)

        if errors:
            raise InvalidGroupError(errors)

        return validated


class Text(Validator):
    """
    Passes text, optionally checking length::

        v = Text(minlength=1, maxlength=16)
        v.validate("x25519") # ok
        v.validate(25519) # nope
        v.validate("") # nope, too short
    """
    NOT_TEXT = 'Expected some text.'
    TOO_SHORT = 'This text is too short.'
    TOO_LONG = 'This text is too long.'

    def __init__(self, minlength=None, maxlength=None, **kwargs):
        self.minlength = minlength
        self.maxlength = maxlength
        super().__init__(**kwargs)


    def validate(self, value):
        if not isinstance(value, str):
            raise InvalidError(self.NOT_TEXT)

        if self.minlength is not None and len(value) < self.minlength:
            raise InvalidError(self.TOO_SHORT)

        if self.maxlength is not None and len(value) > self.maxlength:
            raise InvalidError(self.TOO_LONG)

        return value


class Bool(Validator):
    """
    Passes booleans and converts the usual spellings of them::

        mutual_auth = Bool()
        mutual_auth.validate("yes") # True
        mutual_auth.validate(0) # False
    """
    NOT_BOOL = "Not a boolean"

    def validate(self, value):
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            v = value.lower()
            if v in ("true", "1", "yes"):
                return True
            if v in ("false", "0", "no"):
                return False
        elif isinstance(value, int) and value in (0, 1):
            return value == 1
        raise InvalidError(self.NOT_BOOL)


class Enum(Validator):
    """
    Passes anything that evaluates equal to one of a list of values::

        v = Enum('TLS1_2', 'TLS1_3')
        v.validate('TLS1_3') # ok
        v.validate('SSL3') # nope!
    """
    NOT_IN_LIST = "Not in the list"

    def __init__(self, *values, **kwargs):
        super().__init__(**kwargs)
        self.values = values


    def validate(self, value):
        if value in self.values:
            return value
        raise InvalidError("%s (expected one of %s)" % (
            self.NOT_IN_LIST, ', '.join(str(v) for v in self.values)))


class Integer(Validator):
    """
    Passes integers (but not booleans), optionally range- or set-checked::

        v = Integer(minimum=0)
        v.validate(4000) # ok
        v.validate(-1) # nope
        v.validate(True) # nope

        v = Integer(choices=(112, 128, 192, 256))
        v.validate(160) # nope
    """
    NOT_INTEGER = "Expected an integer."
    TOO_SMALL = "Must be >= %s."
    TOO_LARGE = "Must be <= %s."
    NOT_A_CHOICE = "Must be one of %s."

    def __init__(self, minimum=None, maximum=None, choices=None, **kwargs):
        super().__init__(**kwargs)
        self.minimum = minimum
        self.maximum = maximum
        self.choices = choices


    def validate(self, value):
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidError(self.NOT_INTEGER)
        if self.minimum is not None and value < self.minimum:
            raise InvalidError(self.TOO_SMALL % self.minimum)
        if self.maximum is not None and value > self.maximum:
            raise InvalidError(self.TOO_LARGE % self.maximum)
        if self.choices is not None and value not in self.choices:
            raise InvalidError(self.NOT_A_CHOICE % ', '.join(str(c) for c in self.choices))
        return value


class Number(Validator):
    """
    Passes ints and floats (but not booleans). Bounds are inclusive unless
    ``below`` is used, which is an exclusive upper bound::

        v = Number(minimum=0, below=1)
        v.validate(0.25) # ok
        v.validate(1.0) # nope
        v.validate(float("inf")) # nope, never finite
    """
    NOT_NUMBER = "Expected a number."
    NOT_FINITE = "Must be a finite number."
    TOO_SMALL = "Must be >= %s."
    TOO_LARGE = "Must be <= %s."
    NOT_BELOW = "Must be < %s."
    NOT_ABOVE = "Must be > %s."

    def __init__(self, minimum=None, maximum=None, above=None, below=None, **kwargs):
        super().__init__(**kwargs)
        self.minimum = minimum
        self.maximum = maximum
        self.above = above
        self.below = below


    def validate(self, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidError(self.NOT_NUMBER)
        if isinstance(value, float) and not math.isfinite(value):
            raise InvalidError(self.NOT_FINITE)
        if self.minimum is not None and value < self.minimum:
            raise InvalidError(self.TOO_SMALL % self.minimum)
        if self.maximum is not None and value > self.maximum:
            raise InvalidError(self.TOO_LARGE % self.maximum)
        if self.above is not None and value <= self.above:
            raise InvalidError(self.NOT_ABOVE % self.above)
        if self.below is not None and value >= self.below:
            raise InvalidError(self.NOT_BELOW % self.below)
        return value


class ListOf(Validator):
    """
    Passes a list of values that pass a validator and returns them, converted,
    as a tuple::

        v = ListOf(Integer())
        v.validate([1, 2, 3]) # ok -> (1, 2, 3)
        v.validate([1, 2, "3"]) # nope, error keyed by index 2
        v.validate(1) # nope
    """
    NOT_A_LIST = "Not a list"
    TOO_FEW = "Expected at least %d item(s)."

    def __init__(self, validator, min_items=0, **kwargs):
        super().__init__(**kwargs)
        self.validator = validator
        self.min_items = min_items


    def validate(self, values):
        if not isinstance(values, (list, tuple)):
            raise InvalidError(self.NOT_A_LIST)
        if len(values) < self.min_items:
            raise InvalidError(self.TOO_FEW % self.min_items)

        converted = []
        errors = {}
        for i, v in enumerate(values):
            try:
                converted.append(self.validator.validate(v))
            except InvalidError as e:
                errors[i] = e

        if errors:
            raise InvalidGroupError(errors)

        return tuple(converted)


class MapOf(Validator):
    """
    Passes a dict with text keys whose values all pass a validator::

        v = MapOf(ListOf(Integer(minimum=1)))
        v.validate({'x25519': [32, 32]}) # ok -> {'x25519': (32, 32)}
        v.validate({'x25519': [0, 32]}) # nope, error at x25519[0]
    """
    NOT_A_DICT = "Not a dict"
    BAD_KEY = "Keys must be non-empty text."

    def __init__(self, validator, **kwargs):
        super().__init__(**kwargs)
        self.validator = validator


    def validate(self, value):
        if not isinstance(value, dict):
            raise InvalidError(self.NOT_A_DICT)

        converted = {}
        errors = {}
        for k, v in value.items():
            if not isinstance(k, str) or not k:
                errors[str(k)] = InvalidError(self.BAD_KEY)
                continue
            try:
                converted[k] = self.validator.validate(v)
            except InvalidError as e:
                errors[k] = e

        if errors:
            raise InvalidGroupError(errors)

        return converted


class Nested(Validator):
    """
    Passes an instance of a :class:`~tlsfit.record.Record` subclass, or a dict
    that parses into one::

        v = Nested(CertChainSpec)
        v.validate({'chain_length': 1, 'cert_sizes': [800], 'leaf_key_algorithm': 'ed25519'})
        # -> CertChainSpec(...)
    """
    NOT_A_RECORD = "Expected an object."

    def __init__(self, record_cls, **kwargs):
        super().__init__(**kwargs)
        self.record_cls = record_cls


    def validate(self, value):
        if isinstance(value, self.record_cls):
            value.validate()
            return value
        if isinstance(value, dict):
            return self.record_cls.from_dict(value)
        raise InvalidError(self.NOT_A_RECORD)
