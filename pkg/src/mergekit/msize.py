"""System-size-limited preparation: phase-coupling circuit targets, their
measurement-based preparation from a graph state, exact Schmidt-rank scans
over line layouts, the almost-quadratic local-dimension bound, and the
configuration-limited dynamic simulator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .qcore import Bipartition, Ket, schmidt_rank


@dataclass(frozen=True)
class CircuitSpec:
    """Pairwise phase-coupling circuit: gates exp(i alpha Z x Z) acting on
    1-based qubit pairs of a plus-state register."""

    n_qubits: int
    gates: tuple

    def __init__(self, n_qubits, gates):
        n_qubits = int(n_qubits)
        gates = tuple((int(i), int(j)) for (i, j) in gates)
        for (i, j) in gates:
            if not (1 <= i <= n_qubits and 1 <= j <= n_qubits) or i == j:
                raise ValueError(f"gate ({i},{j}) out of range")
        object.__setattr__(self, "n_qubits", n_qubits)
        object.__setattr__(self, "gates", gates)

    @property
    def n_gates(self):
        return len(self.gates)


def default_circuit() -> CircuitSpec:
    """Eight qubits coupled along a balanced spanning tree."""
    return CircuitSpec(8, [(1, 2), (1, 3), (2, 4), (2, 5), (3, 6), (3, 7),
                           (4, 8)])


def circuit_state(circ: CircuitSpec, alphas) -> Ket:
    """Output of the circuit for the given gate angles (radians)."""
    alphas = list(alphas)
    if len(alphas) != circ.n_gates:
        raise ValueError(
            f"need {circ.n_gates} angles, got {len(alphas)}")
    n = circ.n_qubits
    amps = np.full(2 ** n, 2.0 ** (-n / 2), dtype=complex)
    for (i, j), alpha in zip(circ.gates, alphas):
        amps = _apply_zz_phase(amps, n, i - 1, j - 1, alpha)
    return Ket(amps, (2,) * n)


def _apply_zz_phase(amps, n, qi, qj, alpha):
    idx = np.arange(2 ** n)
    zi = 1 - 2 * ((idx >> (n - 1 - qi)) & 1)
    zj = 1 - 2 * ((idx >> (n - 1 - qj)) & 1)
    return amps * np.exp(1j * alpha * zi * zj)


@dataclass(frozen=True)
class GraphState:
    """Simple graph with target/auxiliary vertex roles."""

    adjacency: np.ndarray
    roles: tuple   # "target" or ("aux", gate index)

    def neighbors(self, v):
        return [u for u in range(self.adjacency.shape[0])
                if self.adjacency[v, u]]


def resource_graph_state(circ: CircuitSpec):
    """The preparation resource: one auxiliary vertex per gate wired to the
    gate's two targets; returns (graph, plus-state graph ket) and verifies
    the vertex stabilizers."""
    n_t, n_a = circ.n_qubits, circ.n_gates
    n = n_t + n_a
    adj = np.zeros((n, n), dtype=bool)
    roles = ["target"] * n_t + [("aux", k) for k in range(n_a)]
    for k, (i, j) in enumerate(circ.gates):
        a = n_t + k
        adj[a, i - 1] = adj[i - 1, a] = True
        adj[a, j - 1] = adj[j - 1, a] = True
    amps = np.full(2 ** n, 2.0 ** (-n / 2), dtype=complex)
    idx = np.arange(2 ** n)
    bits = [(idx >> (n - 1 - v)) & 1 for v in range(n)]
    for v in range(n):
        for u in range(v + 1, n):
            if adj[v, u]:
                amps = amps * np.where((bits[v] & bits[u]).astype(bool),
                                       -1.0, 1.0)
    ket = Ket(amps, (2,) * n)
    graph = GraphState(adjacency=adj, roles=tuple(roles))
    for v in range(n):
        if not _stabilizer_holds(ket, graph, v):
            raise RuntimeError(f"graph-state stabilizer failed at vertex {v}")
    return graph, ket


def _stabilizer_holds(ket: Ket, graph: GraphState, v: int,
                      tol: float = 1e-10) -> bool:
    n = ket.nsys
    t = ket.tensor()
    out = np.moveaxis(np.moveaxis(t, v, 0)[[1, 0]], 0, v)
    flat_sign = np.ones(2 ** n)
    flat_idx = np.arange(2 ** n)
    for u in graph.neighbors(v):
        flat_sign = flat_sign * (1 - 2.0 * ((flat_idx >> (n - 1 - u)) & 1))
    result = out.reshape(-1) * flat_sign
    return bool(np.linalg.norm(result - ket.amps) <= tol)


DEFAULT_CONFIG = {  # party -> number of qubit slots
    1: 2, 2: 2, 3: 2, 4: 2, 5: 2, 6: 2, 7: 2, 8: 1,
}


def mbqc_prepare(circ: CircuitSpec, alphas, tol: float = 1e-8) -> dict:
    """Prepare the circuit state from the resource graph state: rotate each
    auxiliary qubit, measure it, and counter-rotate the gate's targets on
    outcome one.  Enumerates all correction branches and reports the worst
    infidelity against the direct circuit output (global phase ignored)."""
    alphas = list(alphas)
    if len(alphas) != circ.n_gates:
        raise ValueError("one angle per gate required")
    _, ket = resource_graph_state(circ)
    target = circuit_state(circ, alphas)
    n_t, n_a = circ.n_qubits, circ.n_gates
    worst = 0.0
    worst_branch = None
    probs = []
    for outcomes in itertools.product((0, 1), repeat=n_a):
        t = ket.tensor()
        # auxiliaries occupy the trailing axes; process from the last so
        # axis positions stay valid after contraction
        p_branch = 1.0
        for k in range(n_a - 1, -1, -1):
            axis = n_t + k
            alpha = alphas[k]
            rot = np.array([[np.cos(alpha), 1j * np.sin(alpha)],
                            [1j * np.sin(alpha), np.cos(alpha)]])
            t = np.tensordot(rot, t, axes=([1], [axis]))
            t = np.moveaxis(t, 0, axis)
            t = np.take(t, outcomes[k], axis=axis)
            if outcomes[k] == 1:
                i, j = circ.gates[k]
                t = _apply_zz_sign(t, t.ndim, i - 1, j - 1)
        p_branch = float(np.vdot(t, t).real)
        probs.append(p_branch)
        vec = t.reshape(-1)
        fid = abs(np.vdot(target.amps, vec)) ** 2 / max(p_branch, 1e-300)
        worst = max(worst, 1.0 - fid)
        if worst == 1.0 - fid:
            worst_branch = outcomes
    report = {
        "branches": 2 ** n_a,
        "worst_infidelity": float(worst),
        "worst_branch": worst_branch,
        "total_probability": float(sum(probs)),
        "config": dict(DEFAULT_CONFIG),
        "party_slots": {k: ["target", "aux"] if k <= 7 else ["target"]
                        for k in range(1, 9)},
        "pass": bool(worst <= tol and abs(sum(probs) - 1) < 1e-7),
    }
    if not report["pass"]:
        report["failing_branch"] = worst_branch
    return report


def _apply_zz_sign(t, n, qi, qj):
    flat = t.reshape(-1)
    idx = np.arange(flat.size)
    zi = (idx >> (n - 1 - qi)) & 1
    zj = (idx >> (n - 1 - qj)) & 1
    sign = (1 - 2.0 * zi) * (1 - 2.0 * zj)
    return (flat * sign).reshape(t.shape)


# ---------------------------------------------------------------------------
# exact arithmetic over Gaussian integers


@dataclass(frozen=True)
class GaussIntVector:
    """State vector with exact Gaussian-integer entries."""

    entries: tuple     # ((re, im), ...) python ints
    dims: tuple

    def __init__(self, entries, dims):
        dims = tuple(int(d) for d in dims)
        entries = tuple((int(a), int(b)) for (a, b) in entries)
        if len(entries) != int(np.prod(dims)):
            raise ValueError("entry count does not match dims")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "dims", dims)

    def to_complex(self) -> np.ndarray:
        return np.array([a + 1j * b for (a, b) in self.entries])


def _gmul(x, y):
    return (x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0])


def _gsub(x, y):
    return (x[0] - y[0], x[1] - y[1])


def _gdiv_exact(x, y):
    den = y[0] * y[0] + y[1] * y[1]
    re = x[0] * y[0] + x[1] * y[1]
    im = x[1] * y[0] - x[0] * y[1]
    qr, rr = divmod(re, den)
    qi, ri = divmod(im, den)
    if rr or ri:
        raise ArithmeticError("inexact division in fraction-free elimination")
    return (qr, qi)


def exact_gauss_rank(rows, early_stop=None) -> int:
    """Rank over the Gaussian rationals of an integer-pair matrix, by
    fraction-free elimination; exact, no tolerance."""
    mat = [list(r) for r in rows]
    n_rows = len(mat)
    n_cols = len(mat[0]) if n_rows else 0
    rank = 0
    prev = (1, 0)
    r = 0
    for c in range(n_cols):
        piv = None
        for rr in range(r, n_rows):
            if mat[rr][c] != (0, 0):
                piv = rr
                break
        if piv is None:
            continue
        if piv != r:
            mat[r], mat[piv] = mat[piv], mat[r]
        for rr in range(r + 1, n_rows):
            if mat[rr][c] == (0, 0) and prev == (1, 0):
                pass
            for cc in range(c + 1, n_cols):
                num = _gsub(_gmul(mat[r][c], mat[rr][cc]),
                            _gmul(mat[rr][c], mat[r][cc]))
                mat[rr][cc] = _gdiv_exact(num, prev)
            mat[rr][c] = (0, 0)
        prev = mat[r][c]
        r += 1
        rank += 1
        if early_stop is not None and rank >= early_stop:
            return rank
        if r >= n_rows:
            break
    return rank


def exact_schmidt_rank(vec: GaussIntVector, cut: Bipartition) -> int:
    """Schmidt rank across the cut, exactly."""
    left = list(cut.left)
    right = list(cut.right)
    if sorted(left + right) != list(range(len(vec.dims))):
        raise ValueError("cut must partition all subsystems")
    dims = vec.dims
    n = len(dims)
    d_left = int(np.prod([dims[k] for k in left]))
    d_right = int(np.prod([dims[k] for k in right]))
    rows = [[(0, 0)] * d_right for _ in range(d_left)]
    strides = [int(np.prod(dims[k + 1:])) for k in range(n)]
    for flat, entry in enumerate(vec.entries):
        if entry == (0, 0):
            continue
        li = 0
        for k in left:
            li = li * dims[k] + (flat // strides[k]) % dims[k]
        ri = 0
        for k in right:
            ri = ri * dims[k] + (flat // strides[k]) % dims[k]
        rows[li][ri] = entry
    if d_left > d_right:
        rows = [[rows[i][j] for i in range(d_left)] for j in range(d_right)]
    return exact_gauss_rank(rows)


def scaled_quarter_turn_state(circ: CircuitSpec,
                              quarter_multiple: int = 1) -> GaussIntVector:
    """The circuit output at angle (odd multiple of a quarter turn) scaled
    to integer entries: each plus state contributes sqrt(2) and each gate
    contributes sqrt(2), so the amplitudes become products of (+-1 +- i)."""
    k = int(quarter_multiple) % 8
    if k % 2 == 0:
        raise ValueError(
            "exact integer scaling needs an odd multiple of pi/4")
    c = {1: 1, 3: -1, 5: -1, 7: 1}[k]
    d = {1: 1, 3: 1, 5: -1, 7: -1}[k]
    n = circ.n_qubits
    entries = [(1, 0)] * (2 ** n)
    for (i, j) in circ.gates:
        qi, qj = i - 1, j - 1
        for idx in range(2 ** n):
            zi = (idx >> (n - 1 - qi)) & 1
            zj = (idx >> (n - 1 - qj)) & 1
            factor = (c, d) if zi == zj else (c, -d)
            entries[idx] = _gmul(entries[idx], factor)
    return GaussIntVector(entries, (2,) * n)


def permutation_scan(circ: CircuitSpec = None,
                     quarter_multiple: int = 1) -> dict:
    """Exact Schmidt ranks across every edge of every line layout of the
    first seven qubits followed by the eighth, at a gate angle that is an
    odd multiple of a quarter turn.

    Reports whether every one of the 5040 layouts has some edge with rank
    above two, with the circuit connectivity echoed; ranks are computed once
    per distinct cut subset and reused.
    """
    circ = circ or default_circuit()
    if circ.n_qubits != 8 or circ.n_gates != 7:
        raise ValueError("the scan is defined for 8 qubits and 7 gates")
    vec = scaled_quarter_turn_state(circ, quarter_multiple)
    rank_cache = {}

    def cut_rank(subset):
        key = frozenset(subset)
        if key not in rank_cache:
            cut = Bipartition([q - 1 for q in subset],
                              [q - 1 for q in range(1, 9) if q not in key])
            rank_cache[key] = exact_schmidt_rank(vec, cut)
        return rank_cache[key]

    violated = 0
    max_rank_seen = 0
    witness_ok = None
    for perm in itertools.permutations(range(1, 8)):
        has_big = False
        for k in range(2, 7):          # prefix sizes with possible rank > 2
            r = cut_rank(perm[:k])
            max_rank_seen = max(max_rank_seen, r)
            if r > 2:
                has_big = True
                break
        if has_big:
            violated += 1
        elif witness_ok is None:
            witness_ok = perm
    all_violated = violated == 5040
    sample = {str(sorted(k)): v for k, v in
              list(sorted(rank_cache.items(), key=lambda kv: sorted(kv[0])))[:8]}
    return {
        "connectivity": list(circ.gates),
        "permutations": 5040,
        "permutations_with_large_edge": violated,
        "all_have_large_edge": bool(all_violated),
        "distinct_cuts_evaluated": len(rank_cache),
        "max_rank_seen": int(max_rank_seen),
        "counterexample_layout": witness_ok,
        "sample_cut_ranks": sample,
    }


def bipartite_bound_check(m: int, big_d: int, cap: int = 10 ** 7) -> dict:
    """Exhaustive check that pair-distributed entanglement on the complete
    graph of 2m parties meeting every balanced-cut rank condition forces a
    local dimension of at least D^(2 - 1/m)."""
    if m < 2 or big_d < 2:
        raise ValueError("need m >= 2 and D >= 2")
    parties = list(range(2 * m))
    edges = list(itertools.combinations(parties, 2))
    need = big_d ** m
    max_rank = need
    space = max_rank ** len(edges)
    if space > cap:
        raise ValueError(f"search space {space} exceeds the cap {cap}")
    cuts = []
    seen = set()
    for side in itertools.combinations(parties, m):
        other = tuple(p for p in parties if p not in side)
        key = frozenset((side, other))
        if key in seen:
            continue
        seen.add(key)
        cuts.append([e for e in edges
                     if (e[0] in side) != (e[1] in side)])
    best = None
    best_assign = None
    for assign in itertools.product(range(1, max_rank + 1),
                                    repeat=len(edges)):
        ok = True
        for cut in cuts:
            prod = 1
            for idx, e in enumerate(edges):
                if e in cut:
                    prod *= assign[idx]
            if prod < need:
                ok = False
                break
        if not ok:
            continue
        local = max(
            int(np.prod([assign[i] for i, e in enumerate(edges) if p in e]))
            for p in parties)
        if best is None or local < best:
            best, best_assign = local, assign
    bound = big_d ** (2.0 - 1.0 / m)
    symmetric = int(math.ceil(big_d ** (1.0 / m)))
    sym_ok = all(symmetric ** len(cut) >= need for cut in cuts)
    return {
        "m": m,
        "logical_dim": big_d,
        "min_max_local_dim": int(best),
        "bound": float(bound),
        "meets_bound": bool(best >= bound - 1e-9),
        "witness_assignment": best_assign,
        "symmetric_rank": symmetric,
        "symmetric_feasible": bool(sym_ok),
    }


# ---------------------------------------------------------------------------
# dynamic setting


@dataclass(frozen=True)
class Configuration:
    """Per-party qubit-slot counts (dimension caps are 2^slots)."""

    slots: dict

    def __init__(self, slots):
        slots = {int(k): int(v) for k, v in slots.items()}
        if any(v < 0 for v in slots.values()):
            raise ValueError("slot counts must be nonnegative")
        object.__setattr__(self, "slots", slots)

    def slot_list(self):
        out = []
        for p in sorted(self.slots):
            for s in range(self.slots[p]):
                out.append((p, s))
        return out


CONFIG_D0 = Configuration({1: 2, 2: 2, 3: 2, 4: 2, 5: 2, 6: 2, 7: 2, 8: 1})
CONFIG_D1 = Configuration({1: 2, 2: 1, 3: 1, 4: 1})


class ScheduleError(ValueError):
    """Raised when a schedule step violates the configuration."""


class DynamicSimulator:
    """Slot-level simulator for the dynamic setting: local unitaries and
    projective measurements within a party, plus single-qubit sends whose
    receiving slot must be free; an audit trail records the Schmidt rank
    across every single-party cut after each step."""

    def __init__(self, config: Configuration, seed: int = 0):
        self.config = config
        self.slots = config.slot_list()
        self.n = len(self.slots)
        self.state = np.zeros((2,) * self.n, dtype=complex)
        self.state[(0,) * self.n] = 1.0
        self.rng = np.random.default_rng(seed)
        self.audit = []
        self.step_count = 0

    def _pos(self, party, slot):
        try:
            return self.slots.index((int(party), int(slot)))
        except ValueError:
            raise ScheduleError(
                f"party {party} slot {slot} outside the configuration")

    def _record(self):
        ket = Ket(self.state.reshape(-1), (2,) * self.n, normalized=False)
        ranks = {}
        for p in sorted(self.config.slots):
            mine = [i for i, (q, _) in enumerate(self.slots) if q == p]
            if not mine or len(mine) == self.n:
                continue
            ranks[p] = schmidt_rank(
                ket, Bipartition(mine, [i for i in range(self.n)
                                        if i not in mine]))
        self.audit.append(ranks)

    def apply(self, step):
        self.step_count += 1
        op = step["op"]
        if op == "unitary":
            pos = [self._pos(step["party"], s) for s in step["slots"]]
            if len(set(pos)) != len(pos):
                raise ScheduleError("repeated slots in a unitary")
            mat = np.asarray(step["matrix"], dtype=complex)
            if mat.shape != (2 ** len(pos),) * 2:
                raise ScheduleError("unitary size mismatch")
            t = np.moveaxis(self.state, pos, range(len(pos)))
            shp = t.shape
            t = mat @ t.reshape(2 ** len(pos), -1)
            t = t.reshape((2,) * len(pos) + shp[len(pos):])
            self.state = np.moveaxis(t, range(len(pos)), pos)
        elif op == "measure":
            pos = self._pos(step["party"], step["slot"])
            t = np.moveaxis(self.state, pos, 0)
            p0 = float(np.linalg.norm(t[0]) ** 2)
            total = float(np.linalg.norm(t) ** 2)
            outcome = 0 if self.rng.random() * total < p0 else 1
            keep = np.zeros_like(t)
            keep[outcome] = t[outcome]
            norm = np.linalg.norm(keep)
            self.state = np.moveaxis(keep / norm, 0, pos)
            step = dict(step)
            step["outcome"] = outcome
        elif op == "send":
            src = self._pos(*step["from"])
            dst = self._pos(*step["to"])
            if src == dst:
                raise ScheduleError("send to the same slot")
            t = np.moveaxis(self.state, dst, 0)
            if np.linalg.norm(t[1]) > 1e-9:
                raise ScheduleError(
                    f"step {self.step_count}: receiving slot "
                    f"{step['to']} is not initialized")
            t = np.moveaxis(t, 0, dst)
            self.state = np.swapaxes(t, src, dst)
        else:
            raise ScheduleError(f"unknown step {op}")
        self._record()
        return step

    def ket(self) -> Ket:
        return Ket(self.state.reshape(-1), (2,) * self.n, normalized=False)

    def rank_to_party(self, party) -> int:
        mine = [i for i, (q, _) in enumerate(self.slots) if q == party]
        return schmidt_rank(self.ket(), Bipartition(
            mine, [i for i in range(self.n) if i not in mine]))


H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CZ_GATE = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)


def resource_preparation_schedule() -> list:
    """Schedule preparing the fifteen-qubit resource graph state inside the
    default configuration: auxiliaries are born next to one endpoint,
    entangled, shipped to the other endpoint, entangled again, and parked
    wherever a slot is permanently free."""
    s = []

    def plus(p, slot):
        s.append({"op": "unitary", "party": p, "slots": [slot],
                  "matrix": H_GATE})

    def cz(p, s1, s2):
        s.append({"op": "unitary", "party": p, "slots": [s1, s2],
                  "matrix": CZ_GATE})

    def send(p1, s1, p2, s2):
        s.append({"op": "send", "from": (p1, s1), "to": (p2, s2)})

    # gate (4, 8): both endpoints created at party 4, target shipped to 8
    plus(4, 0)           # auxiliary a7
    plus(4, 1)           # target t8
    cz(4, 0, 1)
    send(4, 1, 8, 0)     # t8 home
    plus(4, 1)           # target t4
    cz(4, 0, 1)          # a7 - t4
    # gate (2, 4): a3 born at 2, entangled, walked to party 1 to meet t4
    plus(2, 0)           # target t2
    plus(2, 1)           # auxiliary a3
    cz(2, 0, 1)
    send(2, 1, 1, 0)     # a3 parked at 1
    send(4, 1, 1, 1)     # t4 visits party 1
    cz(1, 0, 1)          # a3 - t4
    send(1, 1, 4, 1)     # t4 home
    # gate (2, 5)
    plus(2, 1)           # auxiliary a4
    cz(2, 0, 1)
    plus(5, 0)           # target t5
    send(2, 1, 5, 1)     # a4 home at 5
    cz(5, 0, 1)
    # gate (1, 2): a1 born at 2, entangled, shipped to 1
    plus(2, 1)           # auxiliary a1
    cz(2, 0, 1)
    send(1, 0, 7, 0)     # park a3 at 7
    send(2, 1, 1, 0)     # a1 to party 1
    plus(1, 1)           # target t1
    cz(1, 0, 1)          # a1 - t1
    send(1, 0, 2, 1)     # a1 home at 2
    # gate (1, 3): a2 born at 3, entangled, shipped to 1
    plus(3, 0)           # target t3
    plus(3, 1)           # auxiliary a2
    cz(3, 0, 1)
    send(3, 1, 1, 0)
    cz(1, 0, 1)          # a2 - t1; a2 home at 1
    # gate (3, 6)
    plus(3, 1)           # auxiliary a5
    cz(3, 0, 1)
    plus(6, 0)           # target t6
    send(3, 1, 6, 1)     # a5 home at 6
    cz(6, 0, 1)
    # gate (3, 7): a6 born at 3, entangled, swapped with the parked a3
    plus(3, 1)           # auxiliary a6
    cz(3, 0, 1)          # a6 - t3
    send(3, 1, 7, 1)     # a6 to party 7 (free slot)
    send(7, 0, 3, 1)     # a3 home at 3
    plus(7, 0)           # target t7
    cz(7, 0, 1)          # a6 - t7
    return s


RESOURCE_SLOT_VERTEX = {
    # (party, slot) -> resource-graph vertex (targets 0..7, aux 8..14)
    (1, 0): 9,    # a2
    (1, 1): 0,    # t1
    (2, 0): 1,    # t2
    (2, 1): 8,    # a1
    (3, 0): 2,    # t3
    (3, 1): 10,   # a3
    (4, 0): 14,   # a7
    (4, 1): 3,    # t4
    (5, 0): 4,    # t5
    (5, 1): 11,   # a4
    (6, 0): 5,    # t6
    (6, 1): 12,   # a5
    (7, 0): 6,    # t7
    (7, 1): 13,   # a6
    (8, 0): 7,    # t8
}


def dynamic_simulate(config: Configuration, schedule, seed: int = 0) -> dict:
    """Run a schedule under the configuration; returns the final state, the
    executed steps (with measurement outcomes), and the audit trail."""
    sim = DynamicSimulator(config, seed=seed)
    executed = []
    for step in schedule:
        executed.append(sim.apply(step))
    return {
        "state": sim.ket(),
        "slots": list(sim.slots),
        "steps": executed,
        "audit": sim.audit,
        "rank_to_party": {p: sim.rank_to_party(p)
                          for p in sorted(config.slots) if config.slots[p]},
    }


def verify_resource_preparation(seed: int = 0) -> dict:
    """The preparation schedule reproduces the resource graph state under
    the default configuration with fidelity one."""
    circ = default_circuit()
    _, target = resource_graph_state(circ)
    out = dynamic_simulate(CONFIG_D0, resource_preparation_schedule(),
                           seed=seed)
    state = out["state"]
    order = [RESOURCE_SLOT_VERTEX[ps] for ps in out["slots"]]
    rearranged = state.permute(list(np.argsort(order)))
    fid = abs(np.vdot(target.amps, rearranged.amps)) ** 2
    return {
        "fidelity": float(fid),
        "steps": len(out["steps"]),
        "pass": bool(fid > 1 - 1e-9),
        "slot_vertex_map": {str(k): v for k, v in
                            RESOURCE_SLOT_VERTEX.items()},
    }


def random_legal_schedule(config: Configuration, rng, length: int = 20):
    """Random mixture of local unitaries, measurements, and legal sends."""
    from .qcore import random_unitary

    parties = [p for p in sorted(config.slots) if config.slots[p] > 0]
    steps = []
    occupied = {(p, s): False for p in parties
                for s in range(config.slots[p])}
    for _ in range(length):
        kind = rng.choice(["unitary", "unitary", "send", "measure"])
        if kind == "unitary":
            p = int(rng.choice(parties))
            n_slots = config.slots[p]
            k = int(rng.integers(1, min(2, n_slots) + 1))
            slots = list(rng.choice(n_slots, size=k, replace=False))
            steps.append({"op": "unitary", "party": p,
                          "slots": [int(s) for s in slots],
                          "matrix": random_unitary(2 ** k, rng)})
            for s in slots:
                occupied[(p, int(s))] = True
        elif kind == "measure":
            busy = [ps for ps, v in occupied.items() if v]
            if not busy:
                continue
            p, s = busy[int(rng.integers(len(busy)))]
            steps.append({"op": "measure", "party": p, "slot": s})
        else:
            busy = [ps for ps, v in occupied.items() if v]
            free = [ps for ps, v in occupied.items() if not v]
            if not busy or not free:
                continue
            src = busy[int(rng.integers(len(busy)))]
            dsts = [ps for ps in free if ps[0] != src[0]]
            if not dsts:
                continue
            dst = dsts[int(rng.integers(len(dsts)))]
            steps.append({"op": "send", "from": src, "to": dst})
            occupied[src] = False
            occupied[dst] = True
    return steps


def verify_dynamic_rank_limit(trials: int = 500, seed: int = 0) -> dict:
    """Under the four-party configuration with a doubled root, no random
    legal schedule terminates with root-cut rank above two."""
    rng = np.random.default_rng(seed)
    worst = 1
    for t in range(trials):
        schedule = random_legal_schedule(CONFIG_D1, rng,
                                         length=int(rng.integers(8, 25)))
        out = dynamic_simulate(CONFIG_D1, schedule, seed=seed + t)
        worst = max(worst, out["rank_to_party"][1])
    return {"trials": trials, "max_root_rank": int(worst),
            "pass": bool(worst <= 2)}
