import csv
import json
from fractions import Fraction as F

from kochtrace.arens_eells import Molecule
from kochtrace.boundary import BoundaryData
from kochtrace.cli import main
from kochtrace.extension import StepFunction
from kochtrace.tree import Arc, BoundaryPoint, VertexId, children, cylinder_interval


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_norm_trace_cylinder(tmp_path, capsys):
    g = BoundaryData.indicator(Arc.of_vertex(VertexId((1, 2, 0))))
    assert main(["norm", "trace", "--data", _write(tmp_path, "g.json", g.to_json()),
                 "--oracle"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["norm"] == [1, 27] and out["oracle"] == [1, 27]


def test_norm_bv_empty(tmp_path, capsys):
    assert main(["norm", "bv", "--func", _write(tmp_path, "f.json", {"coeffs": {}})]) == 0
    assert json.loads(capsys.readouterr().out)["norm"] == [0, 1]


def test_verify_trace_oracle(tmp_path, capsys):
    report = tmp_path / "r.csv"
    code = main(["verify", "trace-oracle", "--depth", "3", "--samples", "100",
                 "--seed", "7", "--report", str(report)])
    assert code == 0
    rows = list(csv.reader(report.open()))
    assert rows[0] == ["sample", "norm", "oracle", "match"]
    assert len(rows) == 101 and all(r[3] == "1" for r in rows[1:])
    assert "100/100" in capsys.readouterr().out


def test_verify_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path, threads in ((a, "1"), (b, "3")):
        assert main(["--threads", threads, "verify", "metric-compare", "--depth", "3",
                     "--samples", "10", "--report", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_unbalanced_molecule_exit_two(tmp_path, capsys):
    m = Molecule({F(0): 1})
    path = _write(tmp_path, "m.json", m.to_json())
    assert main(["norm", "ae", "--molecule", path]) == 2
    assert "error" in capsys.readouterr().err


def test_malformed_json_exit_two(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["norm", "trace", "--data", str(path)]) == 2


def test_ae_alpha_json(tmp_path, capsys):
    m = Molecule.pair(F(0), F(1, 6))
    assert main(["norm", "ae", "--molecule", _write(tmp_path, "m.json", m.to_json()),
                 "--metric", "d_alpha"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert float(out["norm"]["lo"]) <= float(out["norm"]["hi"])


def test_extend_monotone(tmp_path, capsys):
    v = VertexId((0, 1))
    iv = cylinder_interval(v)
    s = cylinder_interval(children(v)[1]).start
    step = StepFunction(Arc.between(iv.start, iv.end), 1, ((BoundaryPoint.from_position(s), 1),))
    assert main(["extend", "monotone", "--in", _write(tmp_path, "s.json", step.to_json())]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["norm"] == [7, 27] and out["constant"] == [7, 6]


def test_extend_inverse_and_indicator(tmp_path, capsys):
    arc = Arc.of_vertex(VertexId((3, 0)))
    assert main(["extend", "indicator", "--in", _write(tmp_path, "a.json", arc.to_json())]) == 0
    assert json.loads(capsys.readouterr().out)["norm"] == [1, 9]
    g = BoundaryData.indicator(arc, 2)
    assert main(["extend", "inverse-s", "--in", _write(tmp_path, "g.json", g.to_json())]) == 0
    assert json.loads(capsys.readouterr().out)["trace_norm"] == [2, 9]


def test_geom_commands(tmp_path, capsys):
    svg = tmp_path / "w.svg"
    assert main(["geom", "whitney", "--depth", "2", "--svg", str(svg), "--validate"]) == 0
    assert svg.read_text().count("<polygon") == 37
    capsys.readouterr()
    assert main(["geom", "koch", "--depth", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["segments"] == 192 and out["perimeter"] == [64, 9]


def test_tree_build(capsys):
    assert main(["tree", "build", "--depth", "2"]) == 0
    levels = json.loads(capsys.readouterr().out)["levels"]
    assert [lvl["total"] for lvl in levels] == [6, 30]


def test_verify_density(capsys):
    assert main(["verify", "density", "--depth", "3"]) == 0
    assert "tent,3" in capsys.readouterr().out
