"""File formats: states, protocols, trees, code isometries, circuits, and
schedules, all as JSON with complex numbers rendered as [re, im] pairs."""

from __future__ import annotations

import json

import numpy as np

from .locc import LoccProtocol, ProtocolOp, Round
from .msize import CircuitSpec, Configuration
from .netcost import IsometrySpec, RootedTree
from .qcore import Ket, StateError


def _c2pair(z):
    return [float(np.real(z)), float(np.imag(z))]


def _pair2c(p):
    return complex(p[0], p[1])


def ket_to_dict(ket: Ket) -> dict:
    out = {"dims": list(ket.dims),
           "amps": [_c2pair(a) for a in ket.amps]}
    if not ket.normalized:
        out["normalized"] = False
    return out


def ket_from_dict(data: dict) -> Ket:
    dims = data["dims"]
    amps = np.array([_pair2c(p) for p in data["amps"]])
    normalized = data.get("normalized", True)
    if normalized and abs(np.linalg.norm(amps) - 1.0) > 1e-6:
        raise StateError(
            f"state norm {np.linalg.norm(amps)} deviates from 1; set "
            "\"normalized\": false to load anyway")
    return Ket(amps, dims, normalized=normalized)


def save_ket(ket: Ket, path: str):
    with open(path, "w") as f:
        json.dump(ket_to_dict(ket), f)


def load_ket(path: str) -> Ket:
    with open(path) as f:
        return ket_from_dict(json.load(f))


def op_to_dict(op: ProtocolOp) -> dict:
    return {"in_dims": list(op.in_dims), "out_dims": list(op.out_dims),
            "mat": [[_c2pair(x) for x in row] for row in op.mat]}


def op_from_dict(d: dict) -> ProtocolOp:
    mat = np.array([[_pair2c(x) for x in row] for row in d["mat"]])
    return ProtocolOp(mat, d["in_dims"], d["out_dims"])


def protocol_to_dict(proto: LoccProtocol) -> dict:
    rounds = []
    for r in proto.rounds:
        instruments = {}
        for key, ops in r.instruments.items():
            skey = ",".join(str(k) for k in key)
            instruments[skey] = [op_to_dict(o) for o in ops]
        rounds.append({"party": r.party, "instruments": instruments})
    return {"parties": {k: list(v) for k, v in proto.parties.items()},
            "rounds": rounds}


def protocol_from_dict(d: dict) -> LoccProtocol:
    rounds = []
    for r in d["rounds"]:
        instruments = {}
        for skey, ops in r["instruments"].items():
            key = tuple(int(x) for x in skey.split(",")) if skey else ()
            instruments[key] = [op_from_dict(o) for o in ops]
        rounds.append(Round(r["party"], instruments))
    return LoccProtocol(parties={k: tuple(v)
                                 for k, v in d["parties"].items()},
                        rounds=rounds)


def load_protocol(path: str) -> LoccProtocol:
    with open(path) as f:
        return protocol_from_dict(json.load(f))


def tree_from_dict(d: dict) -> RootedTree:
    return RootedTree(d["n"], {int(k): int(v)
                               for k, v in d["parent"].items()})


def tree_to_dict(tree: RootedTree) -> dict:
    return {"n": tree.n, "parent": {str(k): v
                                    for k, v in tree.parent.items()}}


def load_tree(path: str) -> RootedTree:
    with open(path) as f:
        return tree_from_dict(json.load(f))


def isometry_from_dict(d) -> IsometrySpec:
    if isinstance(d, list):
        return IsometrySpec([ket_from_dict(k) for k in d])
    kets = [ket_from_dict(k) for k in d["code_kets"]]
    return IsometrySpec(kets, dims=d.get("dims"))


def load_isometry(path: str) -> IsometrySpec:
    with open(path) as f:
        return isometry_from_dict(json.load(f))


def circuit_from_dict(d: dict) -> CircuitSpec:
    return CircuitSpec(d["n_qubits"], [tuple(g) for g in d["gates"]])


def load_circuit(path: str) -> CircuitSpec:
    with open(path) as f:
        return circuit_from_dict(json.load(f))


def schedule_from_dict(d: dict):
    config = Configuration({int(k): int(v)
                            for k, v in d["config"].items()})
    steps = []
    for s in d["steps"]:
        step = dict(s)
        if step["op"] == "unitary":
            step["matrix"] = np.array(
                [[_pair2c(x) for x in row] for row in step["matrix"]])
        if step["op"] == "send":
            step["from"] = tuple(step["from"])
            step["to"] = tuple(step["to"])
        steps.append(step)
    return config, steps


def load_schedule(path: str):
    with open(path) as f:
        return schedule_from_dict(json.load(f))
