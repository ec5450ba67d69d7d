"""Event-driven wave-front tracking for LWR traffic with a moving bottleneck.

The state is a doubly linked list of nodes ordered by position: classical
fronts plus one marker for the slow vehicle (SV).  A non-classical shock, when
present, is a flag on the SV marker since it always travels with it.  Candidate
collisions between neighbours live in a heap and are validated lazily.
All positions, times and densities are Fractions, so event ordering is exact.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .fundamental import ModelParams, constraint_level, flux, psi, sv_speed
from .mesh import DensityMesh, PiecewiseConstant
from .rational import Q, fmt
from .riemann import discrete_classical, discrete_constrained

WW = "WW"
WSV_RIGHT_A = "WSV-right-a"
WSV_RIGHT_B = "WSV-right-b"
WSV_LEFT = "WSV-left"
NS_CREATE_RIGHT = "NS-create-right"
NS_CREATE_LEFT = "NS-create-left"
NS_CANCEL_RIGHT = "NS-cancel-right"
NS_CANCEL_LEFT = "NS-cancel-left"
EVENT_CLASSES = (
    WW,
    WSV_RIGHT_A,
    WSV_RIGHT_B,
    WSV_LEFT,
    NS_CREATE_RIGHT,
    NS_CREATE_LEFT,
    NS_CANCEL_RIGHT,
    NS_CANCEL_LEFT,
)
SV_PARENT = "sv"


class EngineError(RuntimeError):
    """Base class for failures inside the front-tracking engine."""


class UnclassifiableCollision(EngineError):
    """A collision that does not fit the interaction taxonomy."""


class InvariantViolation(EngineError):
    pass


class EventCapExceeded(EngineError):
    pass


class Front:
    """A classical discontinuity moving at constant speed since (t0, x0)."""

    __slots__ = ("id", "x0", "t0", "speed", "left", "right", "alive", "prev", "next")
    is_sv = False

    def __init__(self, fid, x0, t0, left, right):
        self.id = fid
        self.x0 = x0
        self.t0 = t0
        self.left = left
        self.right = right
        self.speed = 1 - left - right
        self.alive = True
        self.prev = None
        self.next = None

    version = 0

    @property
    def kind(self):
        return "shock" if self.left < self.right else "rarefaction"

    def pos(self, t):
        return self.x0 + self.speed * (t - self.t0)

    def record(self):
        return FrontRecord(self.id, self.left, self.right, self.speed)

    def __repr__(self):
        return f"Front({self.id}, {fmt(self.left)}->{fmt(self.right)}, v={fmt(self.speed)}, x0={fmt(self.x0)}@{fmt(self.t0)})"


class SvMarker:
    is_sv = True

    def __init__(self, x0, speed, ns, ns_id):
        self.x0 = x0
        self.t0 = Fraction(0)
        self.speed = speed
        self.ns = ns
        self.ns_id = ns_id
        self.alive = True
        self.version = 0
        self.prev = None
        self.next = None

    def pos(self, t):
        return self.x0 + self.speed * (t - self.t0)

    def __repr__(self):
        return f"SV(x0={fmt(self.x0)}@{fmt(self.t0)}, v={fmt(self.speed)}, ns={self.ns})"


@dataclass(frozen=True)
class FrontRecord:
    id: int
    left: object
    right: object
    speed: object

    @property
    def strength(self):
        return self.right - self.left

    def to_json(self):
        return {"id": self.id, "left": fmt(self.left), "right": fmt(self.right), "speed": fmt(self.speed)}


@dataclass(frozen=True)
class InteractionEvent:
    """One resolved collision.

    For wave-SV events ``incoming``/``outgoing`` hold the single classical
    front (same id, possibly new states), ``psi`` its interaction coefficient
    and ``ns_jump`` the signed strength rho_check - rho_hat of the NS.
    """

    index: int
    t: object
    x: object
    cls: str
    incoming: tuple
    outgoing: tuple
    sv_speed_before: object = None
    sv_speed_after: object = None
    psi: object = 0
    ns_before: bool = False
    ns_after: bool = False
    ns_id: int | None = None
    side: str | None = None
    ns_jump: object = 0

    @property
    def is_sv_event(self):
        return self.cls != WW

    def to_json(self):
        out = {
            "index": self.index,
            "t": fmt(self.t),
            "x": fmt(self.x),
            "class": self.cls,
            "incoming": [f.to_json() for f in self.incoming],
            "outgoing": [f.to_json() for f in self.outgoing],
        }
        if self.is_sv_event:
            out.update(
                side=self.side,
                sv_speed_before=fmt(self.sv_speed_before),
                sv_speed_after=fmt(self.sv_speed_after),
                psi=fmt(self.psi),
                ns_before=self.ns_before,
                ns_after=self.ns_after,
                ns_id=self.ns_id,
            )
        return out


@dataclass(frozen=True)
class SvSegment:
    """SV motion on [t, next segment's t): y(t') = y + speed (t' - t)."""

    t: Fraction
    y: Fraction
    speed: Fraction
    ns: bool
    left_trace: Fraction
    right_trace: Fraction


@dataclass
class Snapshot:
    t: Fraction
    profile: PiecewiseConstant
    y: Fraction
    sv_speed: Fraction
    ns: bool

    def csv_rows(self):
        rows = [(self.t, "-inf", self.profile.values[0], self.y, self.sv_speed)]
        for x, v in zip(self.profile.breakpoints, self.profile.values[1:]):
            rows.append((self.t, x, v, self.y, self.sv_speed))
        return rows


@dataclass
class RunResult:
    params: ModelParams
    mesh: DensityMesh
    rho0: PiecewiseConstant
    y0: Fraction
    T: Fraction
    window: tuple
    far_left: Fraction
    far_right: Fraction
    events: list
    snapshots: list
    sv_path: list
    initial_fronts: list
    initial_parent: dict
    final_fronts: list
    final_positions: dict
    final_profile: PiecewiseConstant
    y_final: Fraction
    sv_speed_final: Fraction
    ns_final: bool
    ns_id_initial: int | None = None

    def class_sequence(self):
        return [e.cls for e in self.events]

    def class_counts(self):
        counts = dict.fromkeys(EVENT_CLASSES, 0)
        for e in self.events:
            counts[e.cls] += 1
        return counts


class Simulation:
    """Mutable front-tracking state; build with :func:`init`, advance with :func:`run`."""

    def __init__(self, params: ModelParams, mesh: DensityMesh, max_events: int = 10**6):
        self.params = params
        self.mesh = mesh
        self.max_events = max_events
        self.t = Fraction(0)
        self.head = None
        self.sv = None
        self.far_left = None
        self.far_right = None
        self.events = []
        self.sv_path = []
        self.initial_fronts = []
        self.initial_parent = {}
        self.ns_id_initial = None
        self.rho0 = None
        self.y0 = None
        self._ids = itertools.count()
        self._seq = itertools.count()
        self._heap = []

    # -- list plumbing -------------------------------------------------
    def nodes(self):
        node = self.head
        while node is not None:
            yield node
            node = node.next

    def fronts(self):
        return [nd for nd in self.nodes() if not nd.is_sv]

    def _link_after(self, anchor, node):
        """Insert ``node`` right after ``anchor`` (or at the head if anchor is None)."""
        if anchor is None:
            node.prev, node.next = None, self.head
            if self.head is not None:
                self.head.prev = node
            self.head = node
        else:
            node.prev, node.next = anchor, anchor.next
            if anchor.next is not None:
                anchor.next.prev = node
            anchor.next = node

    def _unlink(self, node):
        if node.prev is not None:
            node.prev.next = node.next
        else:
            self.head = node.next
        if node.next is not None:
            node.next.prev = node.prev
        node.alive = False
        node.prev = node.next = None

    def left_state(self, node):
        return self.far_left if node.prev is None else _right_of(node.prev, self)

    def right_state(self, node):
        return self.far_right if node.next is None else _left_of(node.next, self)

    # -- event detection -----------------------------------------------
    def _meet(self, a, b):
        if a.speed <= b.speed:
            return None
        xa, xb = a.pos(self.t), b.pos(self.t)
        dt = (xb - xa) / (a.speed - b.speed)
        if dt < 0:
            raise InvariantViolation(f"nodes out of order at t={fmt(self.t)}: {a!r} {b!r}")
        t = self.t + dt
        return t, a.pos(t)

    def _schedule(self, a, b):
        if a is None or b is None:
            return
        hit = self._meet(a, b)
        if hit is None:
            return
        t, x = hit
        heapq.heappush(self._heap, (t, x, next(self._seq), a, b, a.version, b.version))

    def _valid(self, entry):
        _, _, _, a, b, va, vb = entry
        return a.alive and b.alive and a.next is b and a.version == va and b.version == vb

    def next_event(self, horizon=None):
        """Earliest pending collision as ``(t, x, left_node, right_node)``, or None.

        Several collisions at the same point are taken left to right.
        """
        heap = self._heap
        while heap and not self._valid(heap[0]):
            heapq.heappop(heap)
        if not heap:
            return None
        t, x, _, a, b, _, _ = heap[0]
        if horizon is not None and t >= horizon:
            return None
        u = a
        while u.prev is not None and u.prev.pos(t) == x:
            u = u.prev
        while u.next is not None and u.pos(t) == x:
            v = u.next
            if v.pos(t) == x and u.speed > v.speed:
                return t, x, u, v
            u = v
        return t, x, a, b

    # -- resolution ----------------------------------------------------
    def resolve(self, t, x, a, b) -> InteractionEvent:
        if len(self.events) >= self.max_events:
            raise EventCapExceeded(f"more than {self.max_events} events by t={float(t):.6g}")
        self.t = t
        if a.is_sv or b.is_sv:
            event = self._resolve_sv(t, x, a, b)
        else:
            event = self._resolve_ww(t, x, a, b)
        self.events.append(event)
        return event

    def _resolve_ww(self, t, x, a, b):
        new = Front(next(self._ids), x, t, a.left, b.right)
        if new.left == new.right:
            raise UnclassifiableCollision(self._dump(f"fronts {a!r} and {b!r} cancel out"))
        anchor = a.prev
        self._unlink(a)
        self._unlink(b)
        self._link_after(anchor, new)
        self._schedule(new.prev, new)
        self._schedule(new, new.next)
        return InteractionEvent(
            len(self.events), t, x, WW, (a.record(), b.record()), (new.record(),)
        )

    def _resolve_sv(self, t, x, a, b):
        sv = self.sv
        params = self.params
        side = "left" if b.is_sv else "right"
        k = a if side == "left" else b
        if side == "left":
            outer = (k.left, self.right_state(sv))
        else:
            outer = (self.left_state(sv), k.right)
        fan = discrete_constrained(outer[0], outer[1], self.mesh, params)
        out = fan.fronts
        if len(out) != 1:
            raise UnclassifiableCollision(
                self._dump(
                    f"front {k!r} hitting the SV from the {side} yields {len(out)} outgoing fronts "
                    f"for the Riemann problem ({fmt(outer[0])}, {fmt(outer[1])})"
                )
            )
        left, right, _ = out[0]
        new = Front(k.id, x, t, left, right)
        goes_left = bool(fan.left_fronts)

        ns_before, ns_after = sv.ns, fan.ns
        w1, w2 = sv.speed, fan.sv_speed
        coeff = psi(k.left, k.right, params)
        physical = (w1 - w2) / (w1 - k.speed)
        if coeff != physical:
            raise InvariantViolation(
                self._dump(f"psi({fmt(k.left)}, {fmt(k.right)}) = {fmt(coeff)} but SV kink gives {fmt(physical)}")
            )

        if ns_before and ns_after:
            raise UnclassifiableCollision(self._dump(f"front {k!r} leaves the NS in place"))
        if ns_before:
            cls = NS_CANCEL_LEFT if side == "left" else NS_CANCEL_RIGHT
            ns_id = sv.ns_id
        elif ns_after:
            cls = NS_CREATE_LEFT if side == "left" else NS_CREATE_RIGHT
            ns_id = next(self._ids)
        else:
            ns_id = None
            if (left, right) != (k.left, k.right):
                raise UnclassifiableCollision(self._dump(f"front {k!r} changes states crossing the SV"))
            if side == "left":
                cls = WSV_LEFT
            else:
                cls = WSV_RIGHT_A if k.kind == "rarefaction" else WSV_RIGHT_B

        # rebuild the neighbourhood of the SV
        self._unlink(k)
        sv.x0, sv.t0, sv.speed = x, t, w2
        sv.ns = ns_after
        sv.ns_id = ns_id if ns_after else None
        sv.version += 1
        if goes_left:
            self._link_after(sv.prev, new)
        else:
            self._link_after(sv, new)
        for p, q in ((new.prev, new), (new, new.next), (sv.prev, sv), (sv, sv.next)):
            self._schedule(p, q)
        self._record_sv(t)
        self._check_sv_local()
        return InteractionEvent(
            len(self.events),
            t,
            x,
            cls,
            (k.record(),),
            (new.record(),),
            w1,
            w2,
            coeff,
            ns_before,
            ns_after,
            ns_id,
            side,
            params.ns_jump,
        )

    # -- invariants ----------------------------------------------------
    def _record_sv(self, t):
        sv = self.sv
        self.sv_path.append(
            SvSegment(t, sv.pos(t), sv.speed, sv.ns, self.left_state(sv), self.right_state(sv))
        )

    def _check_sv_local(self):
        seg = self.sv_path[-1]
        problems = sv_segment_problems(seg, self.params)
        if problems:
            raise InvariantViolation(self._dump("; ".join(problems)))

    def _dump(self, message):
        lines = [message, f"t = {fmt(self.t)}", f"SV: {self.sv!r}"]
        for nd in self.nodes():
            lines.append(f"  {nd!r} at x={fmt(nd.pos(self.t))}")
        return "\n".join(lines)

    def profile(self, t) -> PiecewiseConstant:
        """Density profile at time ``t`` (no event may lie strictly between self.t and t)."""
        pts = []
        for nd in self.nodes():
            pts.append((nd.pos(t), _right_of(nd, self)))
        bps, vals = [], [self.far_left]
        for xpos, state in pts:
            if bps and bps[-1] == xpos:
                vals[-1] = state
                if len(vals) >= 2 and vals[-2] == state:
                    bps.pop()
                    vals.pop()
            elif state != vals[-1]:
                bps.append(xpos)
                vals.append(state)
        out = PiecewiseConstant.__new__(PiecewiseConstant)
        out.breakpoints, out.values = bps, vals
        return out.merged()

    def snapshot(self, t) -> Snapshot:
        return Snapshot(t, self.profile(t), self.sv.pos(t), self.sv.speed, self.sv.ns)


def _right_of(node, sim):
    return sim.right_state(node) if node.is_sv else node.right


def _left_of(node, sim):
    return sim.left_state(node) if node.is_sv else node.left


def sv_segment_problems(seg: SvSegment, params: ModelParams):
    """Constraint and speed-law checks for one stretch of the SV path."""
    problems = []
    w = seg.speed
    if w != sv_speed(seg.right_trace, params):
        problems.append(f"SV speed {fmt(w)} differs from omega(right trace {fmt(seg.right_trace)})")
    if not (w == params.vb or (0 <= w < params.vb)):
        problems.append(f"SV speed {fmt(w)} not admissible")
    level = constraint_level(w, params)
    for name, rho in (("left", seg.left_trace), ("right", seg.right_trace)):
        if flux(rho) - w * rho > level:
            problems.append(f"constraint violated at the {name} trace {fmt(rho)}")
    if seg.ns:
        if (seg.left_trace, seg.right_trace) != (params.rho_hat, params.rho_check):
            problems.append("non-classical shock with wrong traces")
        if w != params.vb:
            problems.append("non-classical shock off speed vb")
    elif seg.left_trace != seg.right_trace:
        problems.append("SV traces differ without a non-classical shock")
    return problems


def init(rho0: PiecewiseConstant, y0, mesh: DensityMesh, params: ModelParams, max_events: int = 10**6) -> Simulation:
    """Solve the Riemann problems of the datum and place the SV at ``y0``."""
    y0 = Q(y0)
    rho0 = rho0.merged()
    for v in rho0.values:
        if v not in mesh:
            from .mesh import OffMeshError

            raise OffMeshError(f"initial value {fmt(v)} is not on the level-{mesh.n} mesh; quantize first")
    sim = Simulation(params, mesh, max_events)
    sim.rho0, sim.y0 = rho0, y0
    sim.far_left, sim.far_right = rho0.values[0], rho0.values[-1]

    items = []  # (x, order, payload) with order 0 = left of SV, 1 = SV, 2 = right of SV
    at_sv = None
    for j, (xj, l, r) in enumerate(rho0.jumps()):
        if xj == y0:
            at_sv = (j, l, r)
            continue
        for fl, fr, _ in discrete_classical(l, r, mesh):
            items.append((xj, 0, (fl, fr, j)))
    if at_sv is None:
        state = rho0(y0)
        parent, l, r = SV_PARENT, state, state
    else:
        parent, l, r = at_sv
    fan = discrete_constrained(l, r, mesh, params)
    for fl, fr, _ in fan.left_fronts:
        items.append((y0, 0, (fl, fr, parent)))
    items.append((y0, 1, None))
    for fl, fr, _ in fan.right_fronts:
        items.append((y0, 2, (fl, fr, parent)))
    items.sort(key=lambda it: (it[0], it[1]))  # stable: fan order is kept

    sv = SvMarker(y0, fan.sv_speed, fan.ns, None)
    if fan.ns:
        sv.ns_id = next(sim._ids)
        sim.ns_id_initial = sv.ns_id
    sim.sv = sv
    tail = None
    for xpos, order, payload in items:
        if payload is None:
            node = sv
        else:
            fl, fr, par = payload
            node = Front(next(sim._ids), xpos, Fraction(0), fl, fr)
            sim.initial_fronts.append(node.record())
            sim.initial_parent[node.id] = par
        sim._link_after(tail, node)
        tail = node
    for nd in sim.nodes():
        sim._schedule(nd, nd.next)
    sim._record_sv(Fraction(0))
    sim._check_sv_local()
    return sim


def default_window(rho0: PiecewiseConstant, y0, T):
    xs = list(rho0.breakpoints) + [Q(y0)]
    margin = Q(T) + 1
    return (min(xs) - margin, max(xs) + margin)


def run(sim: Simulation, T, snapshot_times=None, window=None) -> RunResult:
    """Advance to time ``T`` (events at exactly T are left unresolved)."""
    T = Q(T)
    if T <= 0:
        raise ValueError("horizon must be positive")
    if window is None:
        window = default_window(sim.rho0, sim.y0, T)
    times = sorted({Q(s) for s in (snapshot_times or [])} | {Fraction(0), T})
    times = [s for s in times if sim.t <= s <= T]
    snaps = []
    while True:
        nxt = sim.next_event(horizon=T)
        te = T if nxt is None else nxt[0]
        while times and times[0] <= te:
            snaps.append(sim.snapshot(times.pop(0)))
        if nxt is None:
            break
        sim.resolve(*nxt)
    fronts = sim.fronts()
    return RunResult(
        params=sim.params,
        mesh=sim.mesh,
        rho0=sim.rho0,
        y0=sim.y0,
        T=T,
        window=window,
        far_left=sim.far_left,
        far_right=sim.far_right,
        events=list(sim.events),
        snapshots=snaps,
        sv_path=list(sim.sv_path),
        initial_fronts=list(sim.initial_fronts),
        initial_parent=dict(sim.initial_parent),
        final_fronts=[f.record() for f in fronts],
        final_positions={f.id: f.pos(T) for f in fronts},
        final_profile=sim.profile(T),
        y_final=sim.sv.pos(T),
        sv_speed_final=sim.sv.speed,
        ns_final=sim.sv.ns,
        ns_id_initial=sim.ns_id_initial,
    )


def simulate(rho0, y0, mesh, params, T, **kw) -> RunResult:
    """Convenience wrapper: ``run(init(...), T)``."""
    snapshot_times = kw.pop("snapshot_times", None)
    window = kw.pop("window", None)
    return run(init(rho0, y0, mesh, params, **kw), T, snapshot_times, window)


@dataclass
class SolutionReport:
    failures: list = field(default_factory=list)
    checked_fronts: int = 0
    checked_segments: int = 0
    checked_snapshots: int = 0
    mass_drift: Fraction = Fraction(0)

    @property
    def ok(self):
        return not self.failures

    def __str__(self):
        head = "solution ok" if self.ok else f"{len(self.failures)} failures"
        return (
            f"{head}: {self.checked_fronts} fronts, {self.checked_segments} SV segments, "
            f"{self.checked_snapshots} snapshots, mass drift {fmt(self.mass_drift)}"
        )


def check_solution(result: RunResult, params: ModelParams | None = None) -> SolutionReport:
    """Re-verify a completed run: Rankine-Hugoniot, constraint, mass balance, SV path."""
    params = params or result.params
    rep = SolutionReport()
    limit = 3 * result.mesh.half_step
    fronts = list(result.initial_fronts)
    for e in result.events:
        fronts.extend(e.outgoing)
    for fr in fronts:
        rep.checked_fronts += 1
        if fr.speed != 1 - fr.left - fr.right:
            rep.failures.append(f"front {fr.id}: speed {fmt(fr.speed)} breaks Rankine-Hugoniot")
        if fr.left > fr.right and fr.left - fr.right > limit:
            rep.failures.append(f"front {fr.id}: rarefaction step {fmt(fr.left - fr.right)} too large")
        if fr.left == fr.right:
            rep.failures.append(f"front {fr.id}: zero strength")

    path = result.sv_path
    for i, seg in enumerate(path):
        rep.checked_segments += 1
        for p in sv_segment_problems(seg, params):
            rep.failures.append(f"SV segment at t={fmt(seg.t)}: {p}")
        if i + 1 < len(path):
            nxt = path[i + 1]
            if seg.y + seg.speed * (nxt.t - seg.t) != nxt.y:
                rep.failures.append(f"SV path jumps at t={fmt(nxt.t)}")
    last = path[-1]
    if last.y + last.speed * (result.T - last.t) != result.y_final:
        rep.failures.append("SV end position inconsistent with its path")

    lo, hi = result.window
    inflow = flux(result.far_left) - flux(result.far_right)
    m0 = result.rho0.integral(lo, hi)
    for snap in result.snapshots:
        rep.checked_snapshots += 1
        bps = snap.profile.breakpoints
        if bps and (bps[0] <= lo or bps[-1] >= hi):
            rep.failures.append(f"waves left the window by t={fmt(snap.t)}")
            continue
        drift = snap.profile.integral(lo, hi) - (m0 + snap.t * inflow)
        if drift != 0:
            rep.failures.append(f"mass drift {fmt(drift)} at t={fmt(snap.t)}")
            rep.mass_drift = max(rep.mass_drift, abs(drift))
    return rep
