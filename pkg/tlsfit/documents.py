"""
Reading and writing the JSON documents tlsfit works with. Every document is a
JSON object carrying a ``schema_version``; the rest of its fields are the
fields of a :class:`~tlsfit.record.Record` and are parsed strictly::

    store = documents.load('profiles.json', ProfileStore)
    documents.save(store, 'pruned.json')

Records that declare ``schema_version`` themselves (the profile store) keep it
as a field; for all others it is an envelope key added on save and checked on
load.
"""
import json

from .errors import ParseError, SchemaError
from .validators import InvalidError, InvalidGroupError

__all__ = ['SCHEMA_VERSION', 'load', 'loads', 'parse', 'save', 'dumps']

SCHEMA_VERSION = 1


def parse(data, record_cls, source='<document>'):
    if not isinstance(data, dict):
        raise ParseError(source, "expected a JSON object at the top level")

    version = data.get('schema_version')
    if version is not None:
        if isinstance(version, bool) or not isinstance(version, int):
            raise ParseError(source, "schema_version: Expected an integer.",
                             [('schema_version', 'Expected an integer.')])
        if version > SCHEMA_VERSION:
            raise SchemaError(source, "schema_version %d is newer than the supported %d" % (
                version, SCHEMA_VERSION))

    if 'schema_version' not in record_cls._fields:
        data = dict((k, v) for k, v in data.items() if k != 'schema_version')

    try:
        return record_cls.from_dict(data)
    except InvalidGroupError as e:
        fields = list(e.flatten())
        raise ParseError(source, '; '.join("%s: %s" % f for f in fields), fields)
    except SchemaError as e:
        raise e.__class__(source, e.message, e.fields)
    except InvalidError as e:
        raise ParseError(source, str(e))


def loads(text, record_cls, source='<string>'):
    try:
        data = json.loads(text)
    except ValueError as e:
        raise ParseError(source, "malformed JSON: %s" % e)
    return parse(data, record_cls, source)


def load(path, record_cls):
    with open(path, encoding='utf-8') as f:
        text = f.read()
    return loads(text, record_cls, source=str(path))


def dumps(record):
    data = record.to_dict()
    if 'schema_version' not in data:
        data = dict([('schema_version', SCHEMA_VERSION)] + list(data.items()))
    return json.dumps(data, indent=2) + '\n'


def save(record, path):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(dumps(record))
