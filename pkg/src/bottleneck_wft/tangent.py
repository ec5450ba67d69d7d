"""Shift (generalized tangent vector) bookkeeping on top of an event log.

A tangent vector assigns a shift xi_k to every classical front and a shift
xi_b to the SV.  Between events shifts are constant; at an event they change
by the interaction rules below.  In the variables q_k = Delta rho_k xi_k and
xi_b every rule is linear, so the whole run is a sparse linear map whose
absolute column sums are the weights W_k(0), W_b(0).

Linear variables are keyed ``("q", front_id)`` and ``"b"``.
"""

from __future__ import annotations

import bisect
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .engine import (
    NS_CANCEL_LEFT,
    NS_CANCEL_RIGHT,
    NS_CREATE_LEFT,
    NS_CREATE_RIGHT,
    SV_PARENT,
    WSV_LEFT,
    WSV_RIGHT_A,
    WSV_RIGHT_B,
    WW,
    RunResult,
)
from .fundamental import ModelParams
from .mesh import PiecewiseConstant
from .rational import fmt

B = "b"
CREATE = (NS_CREATE_LEFT, NS_CREATE_RIGHT)
CANCEL = (NS_CANCEL_LEFT, NS_CANCEL_RIGHT)
WSV = (WSV_LEFT, WSV_RIGHT_A, WSV_RIGHT_B)


class TangentError(RuntimeError):
    pass


def q(fid):
    return ("q", fid)


# ---------------------------------------------------------------------------
# forward propagation


@dataclass
class ShiftState:
    xi: dict  # front id -> shift
    delta: dict  # front id -> current strength right - left
    xi_b: object
    t: object = Fraction(0)
    n_events: int = 0

    def copy(self):
        return ShiftState(dict(self.xi), dict(self.delta), self.xi_b, self.t, self.n_events)

    def q(self, fid):
        return self.delta[fid] * self.xi[fid]


def attach_shifts(result: RunResult, xi0, xi_b0) -> ShiftState:
    """Initial shifts: every front of a jump's fan inherits that jump's shift.

    Fronts born from the SV's own Riemann problem (no datum jump at y0) carry
    the SV shift.  A jump sitting exactly at y0 must share the SV shift.
    """
    jumps = result.rho0.jumps()
    xi0 = list(xi0)
    if len(xi0) != len(jumps):
        raise ValueError(f"expected {len(jumps)} jump shifts, got {len(xi0)}")
    for j, (xj, _, _) in enumerate(jumps):
        if xj == result.y0 and xi0[j] != xi_b0:
            raise ValueError(f"jump {j} sits at the SV, its shift must equal the SV shift")
    xi, delta = {}, {}
    for fr in result.initial_fronts:
        parent = result.initial_parent[fr.id]
        xi[fr.id] = xi_b0 if parent == SV_PARENT else xi0[parent]
        delta[fr.id] = fr.strength
    return ShiftState(xi, delta, xi_b0)


def propagate(shifts: ShiftState, event) -> ShiftState:
    """Apply one interaction to the shifts (returns a new state)."""
    s = shifts.copy()
    s.t = event.t
    s.n_events += 1
    cls = event.cls
    if cls == WW:
        f1, f2 = event.incoming
        (f3,) = event.outgoing
        l1, l2, l3 = f1.speed, f2.speed, f3.speed
        x1, x2 = s.xi.pop(f1.id), s.xi.pop(f2.id)
        s.delta.pop(f1.id)
        s.delta.pop(f2.id)
        s.xi[f3.id] = ((l3 - l2) * x1 + (l1 - l3) * x2) / (l1 - l2)
        s.delta[f3.id] = f3.strength
        return s
    (k_in,) = event.incoming
    (k_out,) = event.outgoing
    xk = s.xi[k_in.id]
    w1, w2 = event.sv_speed_before, event.sv_speed_after
    # SV kink: the SV shift moves toward the front shift by (w1 - w2)/(w1 - lambda)
    kink = (w1 - w2) / (w1 - k_in.speed)
    if cls in WSV:
        s.xi_b = s.xi_b + kink * (xk - s.xi_b)
    elif cls in CREATE:
        s.xi[k_out.id] = (k_in.strength * xk - event.ns_jump * s.xi_b) / k_out.strength
    elif cls in CANCEL:
        xb = s.xi_b
        s.xi_b = xb + kink * (xk - xb)
        s.xi[k_out.id] = (k_in.strength * xk + event.ns_jump * xb) / k_out.strength
    else:
        raise TangentError(f"unknown event class {cls!r}")
    s.delta[k_out.id] = k_out.strength
    return s


def event_identity_failures(before: ShiftState, after: ShiftState, event) -> list:
    """Check the conservation identities of one event in exact arithmetic."""
    bad = []
    cls = event.cls
    if cls == WW:
        f1, f2 = event.incoming
        (f3,) = event.outgoing
        lhs = f3.strength * after.xi[f3.id]
        rhs = f1.strength * before.xi[f1.id] + f2.strength * before.xi[f2.id]
        if lhs != rhs:
            bad.append(f"event {event.index}: WW breaks Delta rho xi conservation")
        return bad
    (k_in,) = event.incoming
    (k_out,) = event.outgoing
    p = event.psi
    xb0, xb1 = before.xi_b, after.xi_b
    xk0, xk1 = before.xi[k_in.id], after.xi[k_out.id]
    if cls in WSV:
        if xb1 != (1 - p) * xb0 + p * xk0 or xk1 != xk0:
            bad.append(f"event {event.index}: wave-SV shift rule broken")
    elif cls in CREATE:
        if xb1 != xb0 or k_out.strength * xk1 + event.ns_jump * xb1 != k_in.strength * xk0:
            bad.append(f"event {event.index}: NS creation identity broken")
    elif cls in CANCEL:
        if xb1 != (1 - p) * xb0 + p * xk0:
            bad.append(f"event {event.index}: NS cancellation SV rule broken")
        if k_out.strength * xk1 != k_in.strength * xk0 + event.ns_jump * xb0:
            bad.append(f"event {event.index}: NS cancellation identity broken")
    return bad


def propagate_all(shifts: ShiftState, events, check: bool = False):
    """Run all events; with ``check`` also return identity failures."""
    failures = []
    for e in events:
        nxt = propagate(shifts, e)
        if check:
            failures.extend(event_identity_failures(shifts, nxt, e))
        shifts = nxt
    return (shifts, failures) if check else shifts


def weighted_norm(shifts: ShiftState):
    """Sum of |Delta rho_k xi_k| over classical fronts plus |xi_b|."""
    total = abs(shifts.xi_b)
    for fid, x in shifts.xi.items():
        total += abs(shifts.delta[fid] * x)
    return total


# ---------------------------------------------------------------------------
# ancestor graph


class AncestorGraph:
    """Which classical fronts feed which, indexed by event cuts.

    A cut ``c`` is the configuration after the first ``c`` events.  Times map
    to cuts: ``(t, "-")`` is just before every event at t, ``(t, "+")`` or a
    bare ``t`` just after.
    """

    def __init__(self, result: RunResult):
        self.result = result
        self.times = [e.t for e in result.events]
        self.n_cuts = len(result.events)
        self.birth = {fr.id: -1 for fr in result.initial_fronts}
        self.death = {}
        self.parents = {}
        self.child = {}
        for e in result.events:
            if e.cls == WW:
                (new,) = e.outgoing
                self.birth[new.id] = e.index
                self.parents[new.id] = tuple(f.id for f in e.incoming)
                for f in e.incoming:
                    self.death[f.id] = e.index
                    self.child[f.id] = new.id
        self.final = [fr.id for fr in result.final_fronts]

    def cut(self, t):
        if isinstance(t, tuple):
            t, side = t
        else:
            side = "+"
        if side == "-":
            return bisect.bisect_left(self.times, t)
        return bisect.bisect_right(self.times, t)

    def alive(self, fid, c) -> bool:
        return self.birth[fid] < c <= self.death.get(fid, math.inf)

    def alive_at(self, c):
        return {fid for fid in self.birth if self.alive(fid, c)}

    def ancestors_cut(self, k, c1, c2):
        if c1 > c2:
            raise ValueError("need t1 <= t2")
        if not self.alive(k, c2):
            raise ValueError(f"front {k} is not alive at the later time")
        out, stack = set(), [k]
        while stack:
            f = stack.pop()
            if self.birth[f] < c1:
                out.add(f)
            else:
                stack.extend(self.parents[f])
        return out

    def ancestors(self, k, t1, t2):
        """K(t1, t2, k): fronts alive at t1 that feed front k alive at t2."""
        return self.ancestors_cut(k, self.cut(t1), self.cut(t2))

    def descendant(self, fid, c=None):
        """The front alive at the final cut that ``fid`` flows into."""
        while fid in self.child:
            fid = self.child[fid]
        return fid

    def precedes(self, i, j) -> bool:
        """i strictly precedes j: i is a proper ancestor of j."""
        stack = list(self.parents.get(j, ()))
        while stack:
            f = stack.pop()
            if f == i:
                return True
            stack.extend(self.parents.get(f, ()))
        return False

    def ancestor_partition_failures(self, cuts=None) -> list:
        """Disjointness, partition and cardinality monotonicity of ancestor sets."""
        if cuts is None:
            cuts = sorted(set([0, self.n_cuts] + list(range(0, self.n_cuts + 1, max(1, self.n_cuts // 8)))))
        bad = []
        for c2 in cuts:
            live2 = self.alive_at(c2)
            prev_sizes = None
            for c1 in sorted((c for c in cuts if c <= c2), reverse=True):
                sets = {k: self.ancestors_cut(k, c1, c2) for k in live2}
                union = set()
                total = 0
                for s in sets.values():
                    union |= s
                    total += len(s)
                if total != len(union):
                    bad.append(f"ancestor sets overlap between cuts {c1} and {c2}")
                if union != self.alive_at(c1):
                    bad.append(f"ancestor sets do not partition cut {c1} (from {c2})")
                sizes = {k: len(s) for k, s in sets.items()}
                if prev_sizes is not None and any(sizes[k] < prev_sizes[k] for k in sizes):
                    bad.append(f"ancestor count shrinks going back to cut {c1}")
                prev_sizes = sizes
        return bad


# ---------------------------------------------------------------------------
# linear transport and backward weights


def event_map(event) -> dict:
    """Post-event variables as linear combinations of pre-event variables.

    Variables missing from the returned dict pass through unchanged.
    """
    cls = event.cls
    if cls == WW:
        f1, f2 = event.incoming
        (f3,) = event.outgoing
        return {q(f3.id): {q(f1.id): 1, q(f2.id): 1}}
    (k,) = event.incoming
    p = event.psi
    kid = k.id
    if cls in WSV:
        return {B: {B: 1 - p, q(kid): p / k.strength}}
    if cls in CREATE:
        return {q(kid): {q(kid): 1, B: -event.ns_jump}}
    if cls in CANCEL:
        return {
            B: {B: 1 - p, q(kid): p / k.strength},
            q(kid): {q(kid): 1, B: event.ns_jump},
        }
    raise TangentError(f"unknown event class {cls!r}")


def _pull_back(rows: dict, events):
    """Substitute post-event variables by pre-event ones, latest event first."""
    for e in reversed(list(events)):
        m = event_map(e)
        for key, row in rows.items():
            if not any(v in m for v in row):
                continue
            new = defaultdict(int)
            for v, c in row.items():
                if v in m:
                    for u, d in m[v].items():
                        new[u] += c * d
                else:
                    new[v] += c
            rows[key] = {u: c for u, c in new.items() if c != 0}
    return rows


@dataclass
class WeightVector:
    """Weights of the time-0 variables plus the composed map itself.

    ``front_weights``/``W_b`` refer to the initial fronts (after splitting of
    rarefactions); ``jump_weights``/``W_b_datum`` to the datum jumps, where a
    jump's q is Delta rho_j xi_j and a fan member carries its share of it.
    """

    front_weights: dict
    W_b: object
    jump_weights: dict
    W_b_datum: object
    rows: dict  # final variable -> {initial variable: coefficient}
    datum_rows: dict

    @property
    def max_weight(self):
        return max([self.W_b, *self.front_weights.values()], key=float)

    def apply(self, shifts0: ShiftState) -> dict:
        """Final linear variables M v0 computed from an initial shift state."""
        v0 = {q(fid): shifts0.q(fid) for fid in shifts0.xi}
        v0[B] = shifts0.xi_b
        return {key: sum((c * v0[u] for u, c in row.items()), 0) for key, row in self.rows.items()}

    def bound(self, shifts0: ShiftState):
        """Right-hand side sum W_k |q_k(0)| + W_b |xi_b(0)|."""
        total = self.W_b * abs(shifts0.xi_b)
        for fid in shifts0.xi:
            total += self.front_weights.get(fid, 0) * abs(shifts0.q(fid))
        return total

    def datum_bound(self, jump_q, xi_b):
        total = self.W_b_datum * abs(xi_b)
        for j, qj in enumerate(jump_q):
            total += self.jump_weights.get(j, 0) * abs(qj)
        return total

    def to_json(self, constant=None):
        out = {
            "W_b": fmt(self.W_b),
            "front_weights": {str(k): fmt(v) for k, v in sorted(self.front_weights.items())},
            "W_b_datum": fmt(self.W_b_datum),
            "jump_weights": {str(k): fmt(v) for k, v in sorted(self.jump_weights.items())},
            "max_weight": fmt(self.max_weight),
        }
        if constant is not None:
            out["bound_constant"] = constant
        return out


def backward_weights(log, graph: AncestorGraph | None = None, T=None, initial=None) -> WeightVector:
    """Weights W_k(0), W_b(0) by pulling the final variables back through the log.

    ``log`` is a RunResult, or a list of events together with ``initial``: a
    dict with keys ``fronts`` (initial FrontRecords), ``parent`` (id -> jump
    index or "sv"), ``final`` (front ids alive at T) and ``n_jumps``.
    """
    if isinstance(log, RunResult):
        events = log.events
        if T is not None:
            events = [e for e in events if e.t < T]
        fronts = log.initial_fronts
        parent = log.initial_parent
        final = [fr.id for fr in log.final_fronts] if T is None or T >= log.T else sorted(
            (graph or AncestorGraph(log)).alive_at(len(events))
        )
        n_jumps = len(log.rho0.jumps())
    else:
        events = list(log)
        fronts, parent, final, n_jumps = initial["fronts"], initial["parent"], initial["final"], initial["n_jumps"]

    rows = {q(fid): {q(fid): 1} for fid in final}
    rows[B] = {B: 1}
    rows = _pull_back(rows, events)

    front_w = {fr.id: sum((abs(r.get(q(fr.id), 0)) for r in rows.values()), 0) for fr in fronts}
    W_b = sum((abs(r.get(B, 0)) for r in rows.values()), 0)

    # birth map to datum variables: q_k = (Delta rho_k / Delta rho_j) q_j, SV-born q_k = Delta rho_k xi_b
    jump_strength = [r - l for _, l, r in _jumps_of(log, n_jumps, fronts, parent)]
    datum_rows = {}
    for key, row in rows.items():
        new = defaultdict(int)
        for v, c in row.items():
            if v == B:
                new[B] += c
                continue
            fid = v[1]
            strength = next(fr.strength for fr in fronts if fr.id == fid)
            par = parent[fid]
            if par == SV_PARENT:
                new[B] += c * strength
            else:
                new[("jump", par)] += c * strength / jump_strength[par]
        datum_rows[key] = dict(new)
    jump_w = {j: sum((abs(r.get(("jump", j), 0)) for r in datum_rows.values()), 0) for j in range(n_jumps)}
    W_b_datum = sum((abs(r.get(B, 0)) for r in datum_rows.values()), 0)
    return WeightVector(front_w, W_b, jump_w, W_b_datum, rows, datum_rows)


def _jumps_of(log, n_jumps, fronts, parent):
    if isinstance(log, RunResult):
        return log.rho0.jumps()
    # synthetic logs: rebuild each jump from the extreme states of its fan
    out = []
    for j in range(n_jumps):
        members = [fr for fr in fronts if parent[fr.id] == j]
        out.append((None, members[0].left, members[-1].right))
    return out


def sv_row(events) -> dict:
    """Coefficients of xi_b at the end of ``events`` in terms of the start variables."""
    return _pull_back({B: {B: 1}}, events)[B]


# ---------------------------------------------------------------------------
# composite creation/cancellation patterns


@dataclass
class NCPattern:
    label: str  # NC1-a, NC1-b, NC2-a, NC2-b, NC3, NC4, or A / B for unpaired ones
    ns_id: int
    create: object = None
    cancel: object = None

    @property
    def events(self):
        return [e for e in (self.create, self.cancel) if e is not None]


_NC_BY_SIDES = {
    ("right", "left"): "NC1",
    ("left", "right"): "NC2",
    ("left", "left"): "NC3",
    ("right", "right"): "NC4",
}


def classify_nc(result: RunResult, graph: AncestorGraph | None = None) -> list:
    """Pair each NS creation with its cancellation and label the composite.

    The a/b split compares the descendants at the horizon of the creating and
    cancelling fronts (different descendants: a).  An NS created but still
    present at the horizon is labelled A; one present at t=0 and later
    cancelled is labelled B.
    """
    graph = graph or AncestorGraph(result)
    by_id = {}
    for e in result.events:
        if e.cls in CREATE:
            by_id.setdefault(e.ns_id, NCPattern("", e.ns_id)).create = e
        elif e.cls in CANCEL:
            by_id.setdefault(e.ns_id, NCPattern("", e.ns_id)).cancel = e
    out = []
    for pat in by_id.values():
        if pat.create is None:
            pat.label = "B"
        elif pat.cancel is None:
            pat.label = "A"
        else:
            base = _NC_BY_SIDES[(pat.create.side, pat.cancel.side)]
            if base in ("NC1", "NC2"):
                k1 = graph.descendant(pat.create.outgoing[0].id)
                k2 = graph.descendant(pat.cancel.outgoing[0].id)
                base += "-a" if k1 != k2 else "-b"
            pat.label = base
        out.append(pat)
    out.sort(key=lambda p: p.events[0].index)
    return out


RESTRICTED_NC = {"NC1-b", "NC2-b", "NC3"}


@dataclass
class WeightBoundReport:
    constant: float
    tv: Fraction
    segments: list = field(default_factory=list)  # (first index, last index, max |entry|)
    violations: list = field(default_factory=list)
    nc_counts: dict = field(default_factory=dict)
    nc_exclusive_ok: bool = True
    sv_chain_failures: list = field(default_factory=list)
    realized: float = 0.0
    restricted: bool = True
    max_column_weight: float = 0.0

    @property
    def ok(self):
        return not self.violations and self.nc_exclusive_ok

    def __str__(self):
        status = "ok" if self.ok else "FAILED"
        return (
            f"weight bound {status}: constant {self.constant:.6g}, realized {self.realized:.6g}, "
            f"{len(self.segments)} restricted segments, NC counts {self.nc_counts}"
        )


def verify_weight_bound(weights: WeightVector | None, rho0: PiecewiseConstant, params: ModelParams, log: RunResult,
                        graph: AncestorGraph | None = None) -> WeightBoundReport:
    """Check the SV-row weights on every maximal restricted stretch of the log.

    Restricted events: wave-wave, plain wave-SV, and creations/cancellations
    belonging to NC1-b, NC2-b or NC3 pairs.  Also checks that NC1-a and NC2-a
    occur at most once and never together, and reports left-trace violations
    for chains of SV-speed-changing fronts.
    """
    graph = graph or AncestorGraph(log)
    tv = rho0.total_variation()
    C = params.weight_bound_constant(tv)
    rep = WeightBoundReport(constant=C, tv=tv)
    patterns = classify_nc(log, graph)
    restricted_ids = set()
    for pat in patterns:
        rep.nc_counts[pat.label] = rep.nc_counts.get(pat.label, 0) + 1
        if pat.label in RESTRICTED_NC:
            restricted_ids.update(e.index for e in pat.events)
    n1a, n2a = rep.nc_counts.get("NC1-a", 0), rep.nc_counts.get("NC2-a", 0)
    rep.nc_exclusive_ok = n1a <= 1 and n2a <= 1 and not (n1a and n2a)
    if not rep.nc_exclusive_ok:
        rep.violations.append(f"NC1-a occurs {n1a} times and NC2-a {n2a} times")

    segment = []

    def close():
        if not segment:
            return
        row = sv_row(segment)
        worst = max(float(abs(c)) for c in row.values())
        rep.segments.append((segment[0].index, segment[-1].index, worst))
        rep.realized = max(rep.realized, worst)
        if not worst < C:
            rep.violations.append(
                f"events {segment[0].index}..{segment[-1].index}: SV weight {worst:.6g} >= {C:.6g}"
            )
        segment.clear()

    for e in log.events:
        if e.cls == WW or e.cls in WSV or e.index in restricted_ids:
            segment.append(e)
        else:
            rep.restricted = False
            close()
    close()
    if weights is not None:
        rep.max_column_weight = float(weights.max_weight)
    rep.sv_chain_failures = sv_chain_failures(log, graph, params)
    return rep


def sv_chain_failures(log: RunResult, graph: AncestorGraph, params: ModelParams) -> list:
    """Fronts i before j, both changing the SV speed, with i an ancestor of j:
    the left state of j must lie in [0, rho_check]."""
    changers = [e for e in log.events if e.cls != WW and e.sv_speed_before != e.sv_speed_after]
    bad = []
    for a_pos, e1 in enumerate(changers):
        i = e1.outgoing[0].id
        for e2 in changers[a_pos + 1:]:
            j = e2.incoming[0].id
            related = i == j or graph.precedes(i, j)
            if related and not (0 <= e2.incoming[0].left <= params.rho_check):
                bad.append(f"events {e1.index} and {e2.index}: left state {fmt(e2.incoming[0].left)}")
    return bad
