"""
The profile selector picks the best-fitting profile of a store for the
constraints currently in force::

    result = select(store, constraints, prev=last.chosen if last else None)
    print(explain(result, store, constraints))

Profiles are ranked by ``(pq_secure, classical_bits)``, highest first, then
by total handshake bytes and finally by id, so every selection is
deterministic. While the link is overloaded PQ profiles can be excluded
(``overload_fallback``), falling back to conventional key exchange. A
previous choice is held while it stays feasible and the best candidate of the
same rank saves less than ``switch_margin_bytes``.
"""
import logging

from .errors import ConfigurationError, NoFeasibleProfile
from .record import Record
from .validators import Bool, Enum, Integer, ListOf, Text

__all__ = [
    'REASONS',
    'SelectionPolicy',
    'SelectionResult',
    'feasible',
    'violation',
    'select',
    'explain',
]

log = logging.getLogger(__name__)

INITIAL = 'initial'
CONSTRAINT_CHANGE = 'constraint_change'
OVERLOAD_FALLBACK = 'overload_fallback'
HYSTERESIS_HOLD = 'hysteresis_hold'
REASONS = (INITIAL, CONSTRAINT_CHANGE, OVERLOAD_FALLBACK, HYSTERESIS_HOLD)


class SelectionPolicy(Record):
    """
    With ``pq_opportunistic`` off, PQ security no longer ranks a profile
    higher; it only matters when the constraints require it.
    """
    objective = Enum('max_security_then_min_bytes', optional=True,
                     default_value='max_security_then_min_bytes')
    switch_margin_bytes = Integer(minimum=0, optional=True, default_value=1000)
    pq_opportunistic = Bool(optional=True, default_value=True)
    overload_fallback = Bool(optional=True, default_value=True)


class SelectionResult(Record):
    chosen = Text(minlength=1)
    feasible_set = ListOf(Text(minlength=1))
    reason = Enum(*REASONS)
    candidate = Text(minlength=1, optional=True)
    prev = Text(minlength=1, optional=True)


def feasible(p, c):
    """
    True if ``p`` meets the security floor, the PQ requirement and the
    handshake byte budget of ``c``. Overload is handled by :func:`select`.
    """
    if p.security.classical_bits < c.min_security_bits:
        return False
    if c.require_pq and not p.security.pq_secure:
        return False
    if c.max_handshake_bytes is not None and p.total_bytes > c.max_handshake_bytes:
        return False
    return True


def _excluded_by_overload(p, c, policy):
    return c.overload and policy.overload_fallback and p.security.pq_secure


def violation(p, c, policy=None):
    """
    The tightest constraint ``p`` violates as ``(constraint_name, detail)``,
    or None. Security is reported before PQ, PQ before overload, overload
    before the byte budget.
    """
    policy = policy or SelectionPolicy()
    if p.security.classical_bits < c.min_security_bits:
        return ('min_security_bits', "%d < %d" % (p.security.classical_bits, c.min_security_bits))
    if c.require_pq and not p.security.pq_secure:
        return ('require_pq', "profile is not pq_secure")
    if _excluded_by_overload(p, c, policy):
        return ('overload', "PQ profiles are excluded while the link is overloaded")
    if c.max_handshake_bytes is not None and p.total_bytes > c.max_handshake_bytes:
        return ('max_handshake_bytes', "%d > %d" % (p.total_bytes, c.max_handshake_bytes))
    return None


def _sort_key(policy):
    if policy.pq_opportunistic:
        return lambda p: (not p.security.pq_secure, -p.security.classical_bits, p.total_bytes, p.id)
    return lambda p: (-p.security.classical_bits, p.total_bytes, p.id)


def _rank(p, policy):
    if policy.pq_opportunistic:
        return p.security.rank
    return p.security.classical_bits


def select(store, c, prev=None, policy=None):
    """
    Select a profile of ``store`` for the constraints ``c``. ``prev`` is the id
    chosen last time, if any. Raises
    :class:`~tlsfit.errors.NoFeasibleProfile` when nothing fits.
    """
    policy = policy or SelectionPolicy()
    if not len(store):
        raise ConfigurationError("cannot select from an empty profile store")

    admissible = [p for p in store if feasible(p, c)]
    feasible_set = [p for p in admissible if not _excluded_by_overload(p, c, policy)]
    if not feasible_set:
        raise NoFeasibleProfile(dict((p.id, violation(p, c, policy)) for p in store))

    candidate = min(feasible_set, key=_sort_key(policy))
    chosen = candidate
    held = store.get(prev) if prev is not None else None

    if held is not None and held in feasible_set and held.id != candidate.id:
        if (_rank(held, policy) == _rank(candidate, policy) and
                held.total_bytes - candidate.total_bytes < policy.switch_margin_bytes):
            chosen = held

    if chosen is not candidate:
        reason = HYSTERESIS_HOLD
    elif len(feasible_set) < len(admissible):
        reason = OVERLOAD_FALLBACK
    elif prev is None:
        reason = INITIAL
    else:
        reason = CONSTRAINT_CHANGE

    if prev is not None and chosen.id != prev:
        log.info("switching profile %s -> %s (%s)", prev, chosen.id, reason)

    return SelectionResult(
        chosen=chosen.id,
        feasible_set=tuple(p.id for p in feasible_set),
        reason=reason,
        candidate=candidate.id,
        prev=prev)


def explain(result, store, c, policy=None):
    """
    A deterministic, human readable report of a selection: the constraints,
    the choice and a verdict per profile. ``result`` may be None when nothing
    was feasible.
    """
    policy = policy or SelectionPolicy()
    lines = ["constraints: min_security_bits=%d require_pq=%s max_handshake_bytes=%s overload=%s" % (
        c.min_security_bits, c.require_pq,
        '-' if c.max_handshake_bytes is None else c.max_handshake_bytes, c.overload)]

    if result is None:
        lines.append("chosen: none (no feasible profile)")
    else:
        lines.append("chosen: %s (%s)" % (result.chosen, result.reason))
        if result.reason == HYSTERESIS_HOLD:
            held, cand = store.get(result.chosen), store.get(result.candidate)
            lines.append("holding %s: %s would save %d bytes, less than switch_margin_bytes %d" % (
                result.prev, result.candidate, held.total_bytes - cand.total_bytes,
                policy.switch_margin_bytes))

    for p in store:
        v = violation(p, c, policy)
        if v is not None:
            verdict = "rejected by %s (%s)" % v
        elif result is not None and p.id == result.chosen:
            verdict = "feasible, chosen"
        else:
            verdict = "feasible"
        lines.append("  %s [%s %d bits, %d bytes]: %s" % (
            p.id, 'pq' if p.security.pq_secure else 'classical', p.security.classical_bits,
            p.total_bytes, verdict))
    return '\n'.join(lines) + '\n'
