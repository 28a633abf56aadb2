"""
Process-wide settings. Call :func:`setup` once at startup, the CLI does it for
you::

    from tlsfit import settings
    settings.setup(fixture_dir='/srv/tlsfit/certs', log_level='INFO')
"""
import os

FIXTURE_ENV = 'TLSFIT_FIXTURES'
PACKAGED_FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')

fixture_dir = None
log_level = 'WARNING'


def setup(fixture_dir=None, log_level=None):
    g = globals()
    if fixture_dir is not None:
        g['fixture_dir'] = fixture_dir
    if log_level is not None:
        g['log_level'] = log_level


def get_fixture_dir():
    """
    An explicit :func:`setup` wins over the ``TLSFIT_FIXTURES`` environment
    variable, which wins over the fixtures shipped with the package.
    """
    if fixture_dir:
        return fixture_dir
    return os.environ.get(FIXTURE_ENV) or PACKAGED_FIXTURES


def reset():
    setup(fixture_dir='', log_level='WARNING')
