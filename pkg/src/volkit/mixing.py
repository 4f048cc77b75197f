"""Enumeration and canonicalization of multi-tone mixing products.

An output frequency of an M-tone excitation is named by an integer vector
``k = (k1, ..., kM)`` meaning ``k1*w1 + ... + kM*wM``.  A symmetric kernel
term landing on that frequency is described by a :class:`MixTerm`: the pair
``(k, r)`` where ``r`` counts, per tone, how many conjugate (plus/minus)
argument pairs the kernel carries on top of the net mixing vector.  The
kernel order is ``n = sum(|km|) + 2*sum(rm)``.

All functions here are pure and operate on plain tuples of ints, so they
are safe for concurrent use and cheap to hash.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

FrequencyIndex = tuple[int, ...]


def is_canonical(k: FrequencyIndex) -> bool:
    """True if the first nonzero entry of ``k`` is positive (or k is all zero)."""
    for v in k:
        if v > 0:
            return True
        if v < 0:
            return False
    return True


def canonicalize_index(k: FrequencyIndex) -> tuple[FrequencyIndex, bool]:
    """Map an index vector to its canonical representative.

    Returns ``(canonical, conjugate)`` where ``conjugate`` is True iff the
    vector was replaced by its negation.  Phasors attached to a negated
    index must be conjugated.
    """
    k = tuple(int(v) for v in k)
    if is_canonical(k):
        return k, False
    return tuple(-v for v in k), True


def enumerate_output_indices(
    m_tones: int, max_order: int, include_dc: bool = False
) -> list[FrequencyIndex]:
    """All canonical mixing vectors with ``1 <= sum|km| <= max_order``.

    One representative per +/- pair, ordered by (total mixing order,
    lexicographic) so serialized index lists are stable.  ``include_dc``
    prepends the all-zero vector, which even-order kernels feed.
    """
    if m_tones < 1 or max_order < 1:
        raise ValueError("need m_tones >= 1 and max_order >= 1")
    out: list[FrequencyIndex] = []
    for k in itertools.product(range(-max_order, max_order + 1), repeat=m_tones):
        tot = sum(abs(v) for v in k)
        if 1 <= tot <= max_order and is_canonical(k):
            out.append(k)
    out.sort(key=lambda k: (sum(abs(v) for v in k), k))
    if include_dc:
        out.insert(0, (0,) * m_tones)
    return out


@dataclass(frozen=True)
class MixTerm:
    """One collected symmetric-kernel term at mixing vector ``k``.

    ``r[m]`` extra conjugate pairs of tone m ride along without shifting the
    output frequency.  The described kernel has ``|km| + rm`` arguments at
    ``sign(km)*wm`` and ``rm`` at ``-sign(km)*wm`` (positive sign when
    km == 0).
    """

    k: FrequencyIndex
    r: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.k) != len(self.r):
            raise ValueError("k and r must have equal length")
        if any(v < 0 for v in self.r):
            raise ValueError("r entries must be nonnegative")

    @property
    def order(self) -> int:
        return sum(abs(v) for v in self.k) + 2 * sum(self.r)

    def argument_tones(self) -> tuple[int, ...]:
        """Kernel arguments as signed 1-based tone ids, in layout order."""
        args: list[int] = []
        for m, (km, rm) in enumerate(zip(self.k, self.r), start=1):
            s = 1 if km >= 0 else -1
            args.extend([s * m] * (abs(km) + rm))
            args.extend([-s * m] * rm)
        return tuple(args)

    def argument_frequencies(self, freqs: tuple[float, ...]) -> tuple[float, ...]:
        """Kernel arguments as signed frequencies for per-tone values ``freqs``."""
        return tuple(
            (freqs[abs(t) - 1] if t > 0 else -freqs[abs(t) - 1])
            for t in self.argument_tones()
        )


def term_multiplicity(term: MixTerm) -> int:
    """Number of identical symmetric-kernel summands the term collects.

    Equals ``n! / prod((|km|+rm)! * rm!)``, the count of distinct argument
    orderings of the underlying kernel.
    """
    mult = math.factorial(term.order)
    for km, rm in zip(term.k, term.r):
        mult //= math.factorial(abs(km) + rm) * math.factorial(rm)
    return mult


def input_coefficient(term: MixTerm, amps: tuple[float, ...]) -> float:
    """Amplitude coefficient multiplying the term's kernel in the output phasor.

    For real per-tone amplitudes ``Vm`` (zero phases) the phasor at the
    term's mixing frequency picks up
    ``prod_m (Vm/2)^(|km|+2*rm) / ((|km|+rm)! * rm!)``.
    """
    c = 1.0
    for Vm, km, rm in zip(amps, term.k, term.r):
        c *= (0.5 * Vm) ** (abs(km) + 2 * rm)
        c /= math.factorial(abs(km) + rm) * math.factorial(rm)
    return c


def terms_at_index(k: FrequencyIndex, order: int) -> list[MixTerm]:
    """All MixTerms of exactly ``order`` landing on index ``k``, r ascending."""
    residual = order - sum(abs(v) for v in k)
    if residual < 0 or residual % 2:
        return []
    pairs = residual // 2
    m = len(k)
    terms = []
    for r in _compositions(pairs, m):
        terms.append(MixTerm(k=tuple(k), r=r))
    terms.sort(key=lambda t: t.r)
    return terms


def terms_up_to_order(k: FrequencyIndex, max_order: int) -> list[MixTerm]:
    """All MixTerms with order <= max_order at index ``k``, by (order, r)."""
    out: list[MixTerm] = []
    lo = sum(abs(v) for v in k)
    if lo == 0:
        lo = 2  # DC starts at the first even order; there is no order-0 term
    for n in range(lo, max_order + 1):
        out.extend(terms_at_index(k, n))
    return out


def enumerate_kernels_for_order(
    m_tones: int, max_order: int, order: int, include_dc: bool = False
) -> dict[FrequencyIndex, list[MixTerm]]:
    """Map each canonical index to its order-``order`` kernel terms.

    Indices that no order-``order`` kernel reaches are omitted, so the
    value lists are always nonempty.
    """
    if not 1 <= order <= max_order:
        raise ValueError("order must lie in 1..max_order")
    table: dict[FrequencyIndex, list[MixTerm]] = {}
    for k in enumerate_output_indices(m_tones, max_order, include_dc=include_dc):
        terms = terms_at_index(k, order)
        if terms:
            table[k] = terms
    return table


def count_terms(m_tones: int, order: int) -> int:
    """Number of raw kernel summands at ``order`` before collection: (2M)^n."""
    if order < 1:
        raise ValueError("order must be >= 1")
    return (2 * m_tones) ** order


def canonicalize_kernel_args(
    args: tuple[int, ...], m_tones: int
) -> tuple[tuple[int, ...], bool]:
    """Canonicalize a tuple of signed tone ids under permutation and conjugation.

    The result is in layout order (tone 1 positives, tone 1 negatives, tone 2
    positives, ...) for the canonical mixing vector; the flag is True iff all
    signs were flipped, meaning the kernel value must be conjugated.
    """
    if not args:
        raise ValueError("empty argument tuple")
    if any(t == 0 or abs(t) > m_tones for t in args):
        raise ValueError("tone ids must be signed integers in 1..m_tones")
    net = [0] * m_tones
    pairs = [0] * m_tones
    pos = [0] * m_tones
    for t in args:
        if t > 0:
            pos[t - 1] += 1
    for m in range(m_tones):
        total = sum(1 for t in args if abs(t) == m + 1)
        net[m] = 2 * pos[m] - total
        pairs[m] = min(pos[m], total - pos[m])
    k, conj = canonicalize_index(tuple(net))
    term = MixTerm(k=k, r=tuple(pairs))
    return term.argument_tones(), conj


def canonicalize_frequency_args(
    args: tuple[float, ...]
) -> tuple[tuple[float, ...], bool]:
    """Canonicalize a tuple of signed frequencies (any units).

    Symmetric kernels are invariant under argument permutation and map to
    their conjugate under global sign flip, so each value class has one
    representative: the descending sort of whichever of ``args``/``-args``
    is lexicographically larger.  Routing every evaluation through the
    representative makes symmetry bitwise exact.
    """
    fwd = tuple(sorted(args, reverse=True))
    rev = tuple(sorted((-a for a in args), reverse=True))
    if fwd >= rev:
        return fwd, False
    return rev, True


def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    """All tuples of ``parts`` nonnegative ints summing to ``total``."""
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out
