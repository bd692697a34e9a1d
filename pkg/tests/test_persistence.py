import json

import numpy as np

from fibercrack.persistence import BranchWriter, load_branch, point_record, read_records, record_point, rewrite


def _branch(study):
    s = study(2.0)
    return s, s.sides[1]


def test_round_trip_is_exact(study, tmp_path):
    s, b = _branch(study)
    path = tmp_path / "b.jsonl"
    with BranchWriter(path, s.mesh, b.origin) as w:
        for pt in b.points:
            w(pt)
    back = load_branch(path, s.mesh, b.termination)
    assert back.origin == b.origin and len(back.points) == len(b.points)
    for a, c in zip(b.points, back.points):
        assert a.lam == c.lam and a.energy == c.energy and a.inertia == c.inertia
        assert np.array_equal(a.state.x, c.state.x) and np.array_equal(a.state.mu, c.state.mu)
        assert a.active == c.active and a.event == c.event and a.controller == c.controller
        assert a.stress == c.stress


def test_record_fields(study):
    s, b = _branch(study)
    pt = next(pt for pt in b.points if pt.active)
    rec = point_record(pt, s.mesh, b.origin, 7)
    assert rec["index"] == 7 and len(rec["dofs"]) == 2 * s.mesh.n_nodes
    assert rec["dofs"][0] == 0.0 and rec["dofs"][-2] == 0.0
    assert len(rec["mu"]) == len(rec["active"]) > 0
    json.dumps(rec, allow_nan=False)
    assert record_point(json.loads(json.dumps(rec)), s.mesh).state.active == pt.active


def test_torn_line_dropped(study, tmp_path):
    s, b = _branch(study)
    path = tmp_path / "b.jsonl"
    rewrite(path, b, s.mesh)
    text = path.read_text()
    path.write_text(text + text.splitlines()[0][:40])
    assert len(read_records(path)) == len(b.points)
    assert [r["index"] for r in read_records(path)] == list(range(len(b.points)))


def test_nan_stress_stored_as_null(study, tmp_path):
    s, b = _branch(study)
    pt = b.points[0]
    old = pt.stress
    pt.stress = float("nan")
    try:
        rec = point_record(pt, s.mesh, b.origin, 0)
    finally:
        pt.stress = old
    assert rec["stress"] is None
    assert np.isnan(record_point(rec, s.mesh).stress)
