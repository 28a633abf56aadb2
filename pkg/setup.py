import os
from setuptools import setup

version = {}
with open(os.path.join(os.path.dirname(__file__), 'tlsfit', 'version.py')) as f:
    exec(f.read(), version)

setup(
    name = 'tlsfit',
    version = version['__version__'],
    packages = ['tlsfit'],
    package_data = {'tlsfit': ['fixtures/*/*.pem']},
    description = 'TLS handshake overhead modeling and profile selection for constrained links.',
    license = 'MIT',
    python_requires = '>=3.8',
    test_suite = 'tests',
    install_requires=[
        'numpy',
        'simpy',
        'cryptography',
    ],
    entry_points = {
        'console_scripts': ['tlsfit = tlsfit.cli:main'],
    },
)
