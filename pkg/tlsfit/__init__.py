"""
Model, measure, simulate and adaptively select TLS handshake configurations
for constrained wireless links.
"""

from .version import __version__
from .errors import *
from .profiles import *
from .costmodel import builtin_catalog, estimate_transcript, model_profile, total_bytes
from .monitor import AppMetadata, ConstraintSet, LinkObservation, MonitorState, \
    derive_constraints, ingest
from .selector import SelectionPolicy, explain, select

__license__ = "MIT"
