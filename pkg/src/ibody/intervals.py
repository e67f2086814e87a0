"""Exact engine for finite unions of closed intervals and their symmetrizing flow.

An :class:`IntervalUnion` is a strictly disjoint, sorted union of closed
intervals of positive length.  The flow ``S^t`` translates every interval
toward the origin at constant speed (the speed is the interval's center), and
whenever two intervals touch they merge and the flow restarts on the merged
configuration with time reparametrized; at t=1 the result is the single
centered interval of the same total length.  Because the motion is piecewise
linear, collision times solve linear equations and the whole flow is computed
event by event rather than by time stepping.

All arithmetic is done on plain Python numbers, so the same code runs in
float mode (collision tolerance 1e-12 x scale) or, when endpoints and times
are :class:`fractions.Fraction`, in exact rational mode (tolerance 0).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

from .errors import DomainError, NumericError

Number = object  # float or Fraction


def _is_exact(values) -> bool:
    return all(isinstance(v, Fraction) for v in values)


class IntervalUnion:
    """Sorted union of pairwise disjoint closed intervals [a_i, b_i], a_i < b_i."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Sequence[Tuple[Number, Number]]):
        ivals = [(a, b) for a, b in intervals]
        if not ivals:
            raise DomainError("interval union must be non-empty")
        ivals.sort(key=lambda ab: ab[0])
        for a, b in ivals:
            if not a < b:
                raise DomainError(f"interval [{a}, {b}] has non-positive length")
        for (a1, b1), (a2, b2) in zip(ivals, ivals[1:]):
            if not b1 < a2:
                raise DomainError(f"intervals [{a1},{b1}] and [{a2},{b2}] are not disjoint")
        self.intervals = tuple(ivals)

    # -- construction helpers ----------------------------------------
    @classmethod
    def exact(cls, intervals) -> "IntervalUnion":
        """Build with endpoints converted to exact rationals."""
        return cls([(Fraction(a), Fraction(b)) for a, b in intervals])

    @classmethod
    def merged(cls, intervals, gap_tolerance: float = 0.0) -> "IntervalUnion":
        """Build from raw (possibly overlapping) pairs, merging gaps <= tolerance."""
        ivals = sorted([(a, b) for a, b in intervals if b > a], key=lambda ab: ab[0])
        if not ivals:
            raise DomainError("no intervals of positive length")
        out = [list(ivals[0])]
        for a, b in ivals[1:]:
            if a - out[-1][1] <= gap_tolerance:
                out[-1][1] = max(out[-1][1], b)
            else:
                out.append([a, b])
        return cls([tuple(ab) for ab in out])

    # -- basic queries ------------------------------------------------
    def __len__(self) -> int:
        return len(self.intervals)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalUnion) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __repr__(self) -> str:
        return f"IntervalUnion({list(self.intervals)})"

    def total_length(self) -> Number:
        return sum((b - a for a, b in self.intervals), start=type(self.intervals[0][0])(0))

    def centers(self) -> List[Number]:
        return [(a + b) / 2 for a, b in self.intervals]

    def half_lengths(self) -> List[Number]:
        return [(b - a) / 2 for a, b in self.intervals]

    def span(self) -> Tuple[Number, Number]:
        return self.intervals[0][0], self.intervals[-1][1]

    def scale(self) -> float:
        a, b = self.span()
        return max(abs(float(a)), abs(float(b)), float(self.total_length()))

    def contains_point(self, x: Number) -> bool:
        return any(a <= x <= b for a, b in self.intervals)

    def contains(self, other: "IntervalUnion") -> bool:
        starts = [a for a, _ in self.intervals]
        for a, b in other.intervals:
            i = bisect_right(starts, a) - 1
            if i < 0 or not (self.intervals[i][0] <= a and b <= self.intervals[i][1]):
                return False
        return True

    def to_floats(self) -> "IntervalUnion":
        return IntervalUnion([(float(a), float(b)) for a, b in self.intervals])

    # -- text round-trip ----------------------------------------------
    def to_text(self) -> str:
        return ";".join(f"{float(a)!r},{float(b)!r}" for a, b in self.intervals)

    @classmethod
    def from_text(cls, text: str) -> "IntervalUnion":
        pairs = []
        for chunk in text.strip().split(";"):
            a, b = chunk.split(",")
            pairs.append((float(a), float(b)))
        return cls(pairs)


@dataclass
class FlowTrace:
    """Event log of the flow: collision times in (0,1) and snapshots.

    ``snapshots[0]`` is the state at t=0, ``snapshots[k]`` the state just
    after the k-th collision, and ``snapshots[-1]`` the state at t=1.
    """

    collision_times: List[float]
    snapshots: List[IntervalUnion]


def _collision_tolerance(union: IntervalUnion, exact: bool) -> Number:
    if exact:
        return Fraction(0)
    return 1e-12 * max(union.scale(), 1.0)


def _merge_touching(centers, halves, tol):
    """Merge runs of consecutive intervals whose gaps are <= tol.

    Half-lengths add exactly across a merge, so the total length is conserved
    up to the (tiny) residual gaps themselves.
    """
    out_c, out_l = [centers[0]], [halves[0]]
    for c, l in zip(centers[1:], halves[1:]):
        gap = (c - l) - (out_c[-1] + out_l[-1])
        if gap <= tol:
            left = out_c[-1] - out_l[-1]
            new_l = out_l[-1] + l + gap / 2
            out_c[-1] = left + new_l
            out_l[-1] = new_l
        else:
            out_c.append(c)
            out_l.append(l)
    return out_c, out_l


def _flow_events(union: IntervalUnion, t):
    """Run the event-driven flow to time t.

    Yields (global_time, centers, halves) after every merge event, then
    returns the final (centers, halves) at time t.
    """
    exact = _is_exact([a for ab in union.intervals for a in ab]) and isinstance(t, Fraction)
    tol = _collision_tolerance(union, exact)
    one = Fraction(1) if exact else 1.0

    centers = union.centers()
    halves = union.half_lengths()
    t_loc = t            # remaining time in the current reparametrized clock
    t_global = one * 0
    events = []

    while True:
        m = len(centers)
        if t_loc == 0:
            break
        if m == 1:
            centers = [centers[0] * (one - t_loc)]
            break
        # earliest touching time of adjacent pairs, in the local clock
        taus = []
        for i in range(m - 1):
            dc = centers[i + 1] - centers[i]
            taus.append(one - (halves[i] + halves[i + 1]) / dc)
        tau = min(taus)
        if tau < 0:
            tau = one * 0    # already touching within tolerance; merge in place
        if tau >= t_loc:
            centers = [c * (one - t_loc) for c in centers]
            merged_c, merged_l = _merge_touching(centers, halves, tol)
            centers, halves = merged_c, merged_l
            break
        # advance to the collision, merge, reparametrize the remaining time
        centers = [c * (one - tau) for c in centers]
        centers, halves = _merge_touching(centers, halves, tol)
        if len(centers) == m:
            raise NumericError("collision event produced no merge; degenerate input")
        t_global = t_global + tau * (one - t_global)
        t_loc = (t_loc - tau) / (one - tau)
        events.append((t_global, list(centers), list(halves)))

    return events, centers, halves


def _to_union(centers, halves) -> IntervalUnion:
    return IntervalUnion([(c - l, c + l) for c, l in zip(centers, halves)])


def flow(union: IntervalUnion, t) -> IntervalUnion:
    """The symmetrizing flow S^t applied to the union, t in [0, 1].

    Total length is conserved (exactly in rational mode, to 1e-12 relative in
    float mode); ``flow(J, 1)`` is the centered interval of length |J|.
    """
    if not 0 <= t <= 1:
        raise DomainError(f"flow time {t} outside [0, 1]")
    if t == 0:
        return union
    _, centers, halves = _flow_events(union, t)
    return _to_union(centers, halves)


def flow_trace(union: IntervalUnion) -> FlowTrace:
    """Complete event log of the flow on [0, 1].

    A union of m intervals produces at most m-1 collisions; simultaneous
    collisions are handled as a single event.
    """
    exact = _is_exact([a for ab in union.intervals for a in ab])
    one_t = Fraction(1) if exact else 1.0
    events, centers, halves = _flow_events(union, one_t)
    times = [float(ev[0]) for ev in events]
    snapshots = [union]
    snapshots += [_to_union(cs, ls) for _, cs, ls in events]
    snapshots.append(_to_union(centers, halves))
    return FlowTrace(collision_times=times, snapshots=snapshots)


def _distance_to(x, union: IntervalUnion):
    starts = [a for a, _ in union.intervals]
    i = bisect_right(starts, x) - 1
    best = None
    if i >= 0:
        a, b = union.intervals[i]
        if x <= b:
            return 0 * x
        best = x - b
    if i + 1 < len(union.intervals):
        d = union.intervals[i + 1][0] - x
        best = d if best is None else min(best, d)
    return best


def _directed_hausdorff(a_union: IntervalUnion, b_union: IntervalUnion):
    # d(., B) is piecewise linear with peaks at B's gap midpoints, so the sup
    # over A is attained at A's endpoints or at gap midpoints inside A.
    mids = [(b1 + a2) / 2 for (_, b1), (a2, _) in
            zip(b_union.intervals, b_union.intervals[1:])]
    best = 0.0
    for a, b in a_union.intervals:
        candidates = [a, b] + [m for m in mids if a < m < b]
        for x in candidates:
            d = _distance_to(x, b_union)
            if d > best:
                best = d
    return best


def hausdorff(union1: IntervalUnion, union2: IntervalUnion) -> float:
    """Exact Hausdorff distance between two interval unions."""
    return float(max(_directed_hausdorff(union1, union2),
                     _directed_hausdorff(union2, union1)))


def minkowski_interval(union: IntervalUnion, a, b) -> IntervalUnion:
    """a * J + [-b, b], with overlapping images merged; a, b >= 0."""
    if a < 0 or b < 0:
        raise DomainError("scaling and thickening must be non-negative")
    if a == 0 and b == 0:
        raise DomainError("result would be empty (a = 0, b = 0)")
    if a == 0:
        return IntervalUnion([(-b, b)])
    return IntervalUnion.merged([(a * lo - b, a * hi + b) for lo, hi in union.intervals],
                                gap_tolerance=0.0)
