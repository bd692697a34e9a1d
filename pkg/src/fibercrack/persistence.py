"""JSON-lines storage of branch points.

One record per line.  Floats are written with ``repr`` precision by the
``json`` module, so a parsed record reproduces the state bit for bit and a
resumed trace continues exactly as an uninterrupted one would.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .continuation import Branch, BranchPoint
from .fem import Mesh, NodalState


def _num(v):
    v = float(v)
    return None if math.isnan(v) else v


def point_record(pt: BranchPoint, mesh: Mesh, origin: str, index: int) -> dict:
    return {
        "branch": origin,
        "index": index,
        "lam": float(pt.lam),
        "energy": float(pt.energy),
        "stress": _num(pt.stress),
        "inertia": [int(v) for v in pt.inertia],
        "stable": pt.stable,
        "stability": pt.stability,
        "active": [int(a) for a in pt.active],
        "mu": [float(v) for v in pt.state.mu],
        "dofs": [float(v) for v in pt.state.full(mesh)],
        "arclength": float(pt.arclength),
        "step": float(pt.step),
        "event": pt.event,
        "healing": bool(pt.healing),
        "controller": pt.controller,
    }


def record_point(rec: dict, mesh: Mesh) -> BranchPoint:
    full = np.asarray(rec["dofs"], dtype=float)
    if full.size != 2 * mesh.n_nodes:
        raise ValueError(f"record has {full.size} dofs, mesh expects {2 * mesh.n_nodes}")
    state = NodalState(lam=rec["lam"], x=full[mesh.free], active=rec["active"], mu=rec["mu"])
    stress = rec.get("stress")
    return BranchPoint(
        state=state,
        energy=rec["energy"],
        inertia=tuple(rec["inertia"]),
        stability=rec["stability"],
        arclength=rec["arclength"],
        step=rec["step"],
        stress=float("nan") if stress is None else stress,
        event=rec.get("event"),
        healing=rec.get("healing", False),
        controller=rec.get("controller"),
    )


def dumps(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"))


class BranchWriter:
    """Append-only writer; use as the ``sink`` of a trace."""

    def __init__(self, path, mesh: Mesh, origin: str, start_index: int = 0, mode: str = "w"):
        self.mesh = mesh
        self.origin = origin
        self.index = start_index
        self._fh = open(path, mode)

    def __call__(self, pt: BranchPoint):
        self._fh.write(dumps(point_record(pt, self.mesh, self.origin, self.index)) + "\n")
        self._fh.flush()
        self.index += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_records(path) -> list:
    """Parsed records of a JSON-lines file; a torn final line is dropped."""
    recs = []
    with open(path) as fh:
        for line in fh:
            if not line.endswith("\n"):
                break
            try:
                recs.append(json.loads(line))
            except json.JSONDecodeError:
                break
    return recs


def load_branch(path, mesh: Mesh, termination: str | None = None) -> Branch:
    recs = read_records(path)
    origin = recs[0]["branch"] if recs else "unknown"
    pts = [record_point(r, mesh) for r in recs]
    return Branch(points=pts, origin=origin, termination=termination or "user_stop")


def rewrite(path, branch: Branch, mesh: Mesh):
    """Write ``branch`` to ``path`` from scratch (atomic replace)."""
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        for i, pt in enumerate(branch.points):
            fh.write(dumps(point_record(pt, mesh, branch.origin, i)) + "\n")
    os.replace(tmp, path)
