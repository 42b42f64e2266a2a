"""Radial feeder model and quasi-static time-series power flow.

Single-phase positive-sequence equivalent, constant-power loads, solved with a
current-injection forward/backward sweep.  A regulator sits at the sending end
of its branch as an ideal ratio ``1 + h * kappa`` ahead of the line impedance.

The sweep is vectorised over a leading batch axis (Monte Carlo iterations and
phase replicas) so a whole ensemble advances one slot at a time.  Each batch
row freezes at its own convergence, so results do not depend on what else is
in the batch.
"""
from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np

from .regulator import VrConfig, next_tap

TOL = 1e-9
MAX_SWEEPS = 100


class FeederError(ValueError):
    pass


class PowerFlowError(RuntimeError):
    def __init__(self, msg, slot=None, iteration=None):
        self.slot = slot
        self.iteration = iteration
        where = []
        if iteration is not None:
            where.append(f"iteration {iteration}")
        if slot is not None:
            where.append(f"slot {slot}")
        super().__init__(msg + (f" ({', '.join(where)})" if where else ""))


@dataclass(frozen=True)
class Bus:
    id: str
    load_share: float = 0.0


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    r_pu: float
    x_pu: float


@dataclass
class FeederModel:
    buses: list[Bus]
    branches: list[Branch]
    substation: str
    v_source_pu: float = 1.0
    s_r_kva: float = 10_000.0
    s_base_kva: float = 10_000.0
    v_base_kv: float = 12.47
    regulator_sites: dict[str, VrConfig] = field(default_factory=dict)
    phase_shares: tuple[float, ...] = (1.0,)
    _compiled: "_Compiled | None" = field(default=None, init=False, repr=False, compare=False)

    @property
    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]

    def load_shares(self) -> np.ndarray:
        """Base-load share per bus in ``compiled().order``, summing to 1."""
        c = self.compiled()
        share = {b.id: b.load_share for b in self.buses}
        w = np.array([share[b] for b in c.order], dtype=float)
        tot = w.sum()
        if tot <= 0:
            raise FeederError("no bus carries load")
        return w / tot

    def compiled(self) -> "_Compiled":
        if self._compiled is None:
            validate_radial(self)
            self._compiled = _compile(self)
        return self._compiled


def validate_radial(feeder: FeederModel) -> None:
    """Raise ``FeederError`` describing the first structural problem found."""
    ids = [b.id for b in feeder.buses]
    seen = set()
    for b in ids:
        if b in seen:
            raise FeederError(f"duplicate bus id {b!r}")
        seen.add(b)
    if feeder.substation not in seen:
        raise FeederError(f"substation bus {feeder.substation!r} not declared")
    # each phase replica carries the whole feeder scaled by its share; shares average to 1
    ph = np.asarray(feeder.phase_shares, dtype=float)
    if ph.size == 0 or np.any(ph <= 0) or abs(ph.mean() - 1.0) > 1e-9:
        raise FeederError("phase_shares must be positive with mean 1")
    if not feeder.s_r_kva > 0:
        raise FeederError("transformer rating must be positive")
    if not feeder.s_base_kva > 0:
        raise FeederError("base power must be positive")
    if not feeder.v_source_pu > 0:
        raise FeederError("source voltage must be positive")
    for b in feeder.buses:
        if b.load_share < 0:
            raise FeederError(f"bus {b.id!r} has negative load share")
    br_ids = set()
    for br in feeder.branches:
        if br.id in br_ids:
            raise FeederError(f"duplicate branch id {br.id!r}")
        br_ids.add(br.id)
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                raise FeederError(f"branch {br.id!r} references undeclared bus {end!r} (disconnected)")
        if br.from_bus == br.to_bus:
            raise FeederError(f"branch {br.id!r} is a self-loop")
        if not (br.r_pu >= 0 and br.x_pu >= 0) or (br.r_pu == 0 and br.x_pu == 0):
            raise FeederError(f"branch {br.id!r} needs nonnegative, nonzero impedance")
    for site in feeder.regulator_sites:
        if site not in br_ids:
            raise FeederError(f"regulator on unknown branch {site!r}")

    adj = defaultdict(list)
    for br in feeder.branches:
        adj[br.from_bus].append((br.to_bus, br.id))
        adj[br.to_bus].append((br.from_bus, br.id))
    visited = {feeder.substation}
    stack = [(feeder.substation, None)]
    while stack:
        node, via = stack.pop()
        for nxt, bid in adj[node]:
            if bid == via:
                continue
            if nxt in visited:
                raise FeederError(f"cycle detected through branch {bid!r}")
            visited.add(nxt)
            stack.append((nxt, bid))
    missing = [b for b in ids if b not in visited]
    if missing:
        raise FeederError(f"bus {missing[0]!r} is disconnected from the substation")
    if len(feeder.branches) != len(ids) - 1:
        raise FeederError("branch count must equal bus count - 1")


@dataclass(frozen=True)
class _Compiled:
    order: list[str]              # BFS order, root first
    index: dict[str, int]
    parent: np.ndarray            # parent position per bus (root -> -1)
    z: np.ndarray                 # impedance of the branch feeding each bus
    branch_of: list[str | None]   # branch id feeding each bus
    reg_pos: list[int]            # bus positions directly downstream of a regulator, head to tail
    reg_cfg: list[VrConfig]
    reg_ancestors: list[list[int]]  # for each regulator, indices of upstream regulators
    path: np.ndarray              # path[m, i] = 1 if the branch feeding i lies on root->m


def _compile(feeder: FeederModel) -> _Compiled:
    children = defaultdict(list)
    for br in feeder.branches:
        children[br.from_bus].append(br)
        children[br.to_bus].append(br)
    order = [feeder.substation]
    parent_of = {feeder.substation: None}
    feed = {feeder.substation: None}
    q = deque([feeder.substation])
    while q:
        node = q.popleft()
        for br in children[node]:
            other = br.to_bus if br.from_bus == node else br.from_bus
            if other in parent_of:
                continue
            parent_of[other] = node
            feed[other] = br
            order.append(other)
            q.append(other)
    index = {b: i for i, b in enumerate(order)}
    n = len(order)
    parent = np.full(n, -1, dtype=np.int64)
    z = np.zeros(n, dtype=complex)
    branch_of: list[str | None] = [None] * n
    for b in order[1:]:
        i = index[b]
        parent[i] = index[parent_of[b]]
        z[i] = complex(feed[b].r_pu, feed[b].x_pu)
        branch_of[i] = feed[b].id
    reg = sorted((index[_regulated_bus(feeder, bid, parent_of)], bid) for bid in feeder.regulator_sites)
    reg_pos = [p for p, _ in reg]
    reg_cfg = [feeder.regulator_sites[bid] for _, bid in reg]
    ancestors = []
    for p in reg_pos:
        anc = []
        j = parent[p]
        while j > 0:
            if j in reg_pos:
                anc.append(reg_pos.index(j))
            j = parent[j]
        ancestors.append(anc)
    path = np.zeros((n, n))
    for m in range(1, n):
        i = m
        while i > 0:
            path[m, i] = 1.0
            i = parent[i]
    return _Compiled(order, index, parent, z, branch_of, reg_pos, reg_cfg, ancestors, path)


def _regulated_bus(feeder, bid, parent_of):
    br = next(b for b in feeder.branches if b.id == bid)
    return br.to_bus if parent_of.get(br.to_bus) == br.from_bus else br.from_bus


def path_matrices(c: _Compiled, ratio: np.ndarray):
    """Cumulative ratio G (B, n) and drop matrix D (B, n, n) for given ratios.

    For fixed ratios the sweep is linear in the load currents ``J``:
    ``V = G * v0 - D @ J`` and the source current is ``G @ J``.
    """
    n = len(c.order)
    g = np.ones_like(ratio)
    for i in range(1, n):
        g[:, i] = g[:, c.parent[i]] * ratio[:, i]
    w = c.z[None, :] / (g * g)
    inner = np.matmul(c.path[None, :, :] * w[:, None, :], c.path.T)
    return g, g[:, :, None] * inner * g[:, None, :]


def sweep_batch(c: _Compiled, s_pu: np.ndarray, ratio: np.ndarray, v0: float,
                v_init: np.ndarray | None = None, tol: float = TOL, max_sweeps: int = MAX_SWEEPS,
                mats=None):
    """Forward/backward sweep for a batch of snapshots.

    ``s_pu`` (B, n) complex load per bus, ``ratio`` (B, n) regulator ratio of
    the branch feeding each bus (1 where unregulated).  Returns complex bus
    voltages (B, n), load currents (B, n) and sweep counts (B,); rows that
    fail to converge carry a count of -1.
    """
    bsz, n = s_pu.shape
    g, d = path_matrices(c, ratio) if mats is None else mats
    vs = g * v0
    v = vs.astype(complex) if v_init is None else v_init.astype(complex, copy=True)
    done = np.zeros(bsz, dtype=bool)
    count = np.full(bsz, -1, dtype=np.int64)
    v_out = np.empty_like(v)
    j_out = np.empty_like(v)
    for it in range(1, max_sweeps + 1):
        j = np.conj(s_pu / v)
        v_new = vs - np.matmul(d, j[:, :, None])[:, :, 0]
        delta = np.max(np.abs(v_new - v), axis=1)
        v = v_new
        newly = (~done) & (delta < tol)
        if newly.any():
            v_out[newly] = v[newly]
            j_out[newly] = np.conj(s_pu[newly] / v[newly])
            count[newly] = it
            done |= newly
            if done.all():
                break
        if not np.all(np.isfinite(delta)):
            break
    return v_out, j_out, count


def line_currents(c: _Compiled, ratio: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Current through each branch impedance (indexed by the bus it feeds)."""
    acc = j.astype(complex, copy=True)
    for i in range(len(c.order) - 1, 0, -1):
        acc[..., c.parent[i]] += ratio[..., i] * acc[..., i]
    return acc


@dataclass
class SnapshotResult:
    v_pu: np.ndarray            # per bus, in compiled order
    branch_flow: dict           # branch id -> complex sending-end power (pu)
    substation_s: float         # kVA
    load_factor_k: float
    s_head_pu: complex
    losses_pu: complex
    sweeps: int
    bus_order: list[str]


def _as_bus_vector(feeder, values, dtype):
    c = feeder.compiled()
    out = np.zeros(len(c.order), dtype=dtype)
    if isinstance(values, dict):
        for k, val in values.items():
            if k not in c.index:
                raise FeederError(f"unknown bus {k!r}")
            out[c.index[k]] = val
    else:
        arr = np.asarray(values, dtype=dtype)
        if arr.shape != out.shape:
            raise FeederError(f"expected {out.size} bus values, got shape {arr.shape}")
        out[:] = arr
    return out


def ratio_matrix(c: _Compiled, taps: np.ndarray) -> np.ndarray:
    """(B, n) ratio per bus from (B, n_reg) tap positions."""
    taps = np.atleast_2d(taps)
    r = np.ones((taps.shape[0], len(c.order)))
    for k, (pos, cfg) in enumerate(zip(c.reg_pos, c.reg_cfg)):
        r[:, pos] = 1.0 + taps[:, k] * cfg.kappa
    return r


def solve_snapshot(feeder: FeederModel, bus_loads, taps=None) -> SnapshotResult:
    """Solve one operating point.

    ``bus_loads`` maps bus id to complex kVA (kW + j kvar) or is a vector in
    compiled bus order.  ``taps`` maps regulated branch id to tap position.
    """
    c = feeder.compiled()
    s = _as_bus_vector(feeder, bus_loads, complex)
    if not np.all(np.isfinite(s)):
        raise FeederError("loads must be finite")
    h = np.zeros(len(c.reg_pos))
    if taps:
        reg_branch = [c.branch_of[p] for p in c.reg_pos]
        for bid, val in taps.items():
            h[reg_branch.index(bid)] = val
    s_pu = (s / feeder.s_base_kva)[None, :]
    ratio = ratio_matrix(c, h[None, :])
    v, j, cnt = sweep_batch(c, s_pu, ratio, feeder.v_source_pu)
    if cnt[0] < 0:
        raise PowerFlowError(f"power flow did not converge in {MAX_SWEEPS} sweeps")
    v = v[0]
    line = line_currents(c, ratio[0], j[0])
    flows = {}
    losses = 0j
    for i in range(1, len(c.order)):
        flows[c.branch_of[i]] = v[c.parent[i]] * np.conj(ratio[0, i] * line[i])
        losses += abs(line[i]) ** 2 * c.z[i]
    s_head = v[0] * np.conj(line[0])
    s_kva = abs(s_head) * feeder.s_base_kva
    return SnapshotResult(np.abs(v), flows, s_kva, s_kva / feeder.s_r_kva, s_head,
                          losses, int(cnt[0]), list(c.order))


@dataclass
class BusLoads:
    """Per-slot, per-bus load in kW / kvar (last axis in compiled bus order)."""
    p_kw: np.ndarray
    q_kvar: np.ndarray
    resolution_h: float = 0.25

    @property
    def horizon_slots(self) -> int:
        return self.p_kw.shape[-2]


@dataclass
class TimeSeriesResult:
    k: np.ndarray          # (B, slots)
    v_reg: np.ndarray      # (B, phases, slots, n_reg) voltage at regulated nodes
    v_min: np.ndarray      # (B, slots) lowest bus voltage
    taps: np.ndarray       # (B, phases, slots, n_reg) tap applied in each slot
    ops: np.ndarray        # (B, phases, n_reg) total tap operations
    resolution_h: float

    @property
    def horizon_slots(self) -> int:
        return self.k.shape[-1]


def run_timeseries(feeder: FeederModel, base: BusLoads, pev_p_kw: np.ndarray | None = None,
                   pev_power_factor: float = 0.95, iteration_offset: int = 0) -> TimeSeriesResult:
    """Quasi-static simulation over every slot of the load profiles.

    ``pev_p_kw`` has shape (slots, n) or (B, slots, n) for a batch of Monte
    Carlo iterations sharing one base load.  Regulators act once per slot on
    their own node voltage from the previous slot's solution; downstream
    units see the ratio change just made upstream.  Tap positions persist.
    """
    c = feeder.compiled()
    n = len(c.order)
    slots = base.p_kw.shape[0]
    if base.p_kw.shape != (slots, n) or base.q_kvar.shape != (slots, n):
        raise FeederError(f"base load must have shape ({slots}, {n})")
    if pev_p_kw is None:
        pev = np.zeros((1, slots, n))
    else:
        pev = np.asarray(pev_p_kw)
        if pev.ndim == 2:
            pev = pev[None]
        if pev.shape[1:] != (slots, n):
            raise FeederError(f"PEV load shape {pev.shape[1:]} does not match base {(slots, n)}")
    n_it = pev.shape[0]
    shares = np.asarray(feeder.phase_shares, dtype=float)
    n_ph = shares.size
    bsz = n_it * n_ph
    tan_phi = math.tan(math.acos(pev_power_factor))
    n_reg = len(c.reg_pos)

    base_s = (base.p_kw + 1j * base.q_kvar) / feeder.s_base_kva
    pev_coef = (1.0 + 1j * tan_phi) / feeder.s_base_kva
    share_col = np.tile(shares, n_it)[:, None]          # (bsz, 1)
    it_of_row = np.repeat(np.arange(n_it), n_ph)

    k_out = np.empty((bsz, slots))
    vmin_out = np.empty((bsz, slots))
    vreg_out = np.empty((bsz, slots, n_reg))
    taps_out = np.empty((bsz, slots, n_reg), dtype=np.int64)
    taps = np.zeros((bsz, n_reg), dtype=np.int64)
    ops = np.zeros((bsz, n_reg), dtype=np.int64)
    ratio = np.ones((bsz, n))
    g, d = path_matrices(c, ratio)
    v_prev = None
    for t in range(slots):
        if t > 0 and n_reg:
            before = taps.copy()
            meas = np.abs(v_prev[:, c.reg_pos])
            old_ratio = ratio[:, c.reg_pos].copy()
            for r, cfg in enumerate(c.reg_cfg):
                m = meas[:, r]
                for a in c.reg_ancestors[r]:
                    m = m * (ratio[:, c.reg_pos[a]] / old_ratio[:, a])
                new = next_tap(taps[:, r], m, cfg)
                ops[:, r] += np.abs(new - taps[:, r])
                taps[:, r] = new
                ratio[:, c.reg_pos[r]] = 1.0 + new * cfg.kappa
            moved = np.any(taps != before, axis=1)
            if moved.any():
                g[moved], d[moved] = path_matrices(c, ratio[moved])
        s_pu = share_col * (base_s[t][None, :] + pev[it_of_row, t, :] * pev_coef)
        v, j, cnt = sweep_batch(c, s_pu, ratio, feeder.v_source_pu, v_init=v_prev, mats=(g, d))
        if np.any(cnt < 0):
            bad = int(np.argmax(cnt < 0))
            raise PowerFlowError(f"power flow did not converge in {MAX_SWEEPS} sweeps",
                                 slot=t, iteration=iteration_offset + int(it_of_row[bad]))
        s_head = np.abs(v[:, 0] * np.conj(np.sum(g * j, axis=1)))
        k_out[:, t] = s_head
        av = np.abs(v)
        vmin_out[:, t] = av.min(axis=1)
        if n_reg:
            vreg_out[:, t] = av[:, c.reg_pos]
            taps_out[:, t] = taps
        v_prev = v

    k = k_out.reshape(n_it, n_ph, slots).mean(axis=1) * feeder.s_base_kva / feeder.s_r_kva
    return TimeSeriesResult(
        k=k,
        v_reg=vreg_out.reshape(n_it, n_ph, slots, n_reg),
        v_min=vmin_out.reshape(n_it, n_ph, slots).min(axis=1),
        taps=taps_out.reshape(n_it, n_ph, slots, n_reg),
        ops=ops.reshape(n_it, n_ph, n_reg),
        resolution_h=base.resolution_h,
    )
