import json
import math

import pytest

from tentacle import codec
from tentacle.cli import RunConfig, main
from tentacle.errors import SpectralSymmetryError, ValidationError
from tentacle.hormander import HormanderBlock, normal_form


def write(path, document):
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


@pytest.fixture
def h_ex_file(tmp_path, h_ex):
    return write(tmp_path / "h_ex.json", codec.hamiltonian_to_json(h_ex))


def test_check(h_ex_file, capsys):
    assert main(["check", "--input", h_ex_file]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["overall"] == "strongly_tentacular"


def test_check_text(h_ex_file, capsys):
    assert main(["check", "--input", h_ex_file, "--format", "text"]) == 0
    output = capsys.readouterr().out
    assert output.startswith("overall: strongly_tentacular")
    assert "h4: verified" in output


def test_orbits(h_ex_file, capsys):
    assert main(["orbits", "--input", h_ex_file, "--k-max", "2"]) == 0
    document = json.loads(capsys.readouterr().out)
    orbits = document["orbits"]
    assert len(orbits) == 4
    assert [orbit["action"] for orbit in orbits] == pytest.approx([math.pi, -math.pi, 2 * math.pi, -2 * math.pi])
    for orbit in orbits:
        assert orbit["ratio"] == pytest.approx(2.0, abs=1e-6)
        assert orbit["action_quadrature"] == pytest.approx(orbit["action"], abs=1e-6)
        assert orbit["cz_transverse"] == 0
    assert "index_normalization" in document


def test_classify(h_ex_file, capsys):
    assert main(["classify", "--input", h_ex_file]) == 0
    document = json.loads(capsys.readouterr().out)
    assert [block["kind"] for block in document["blocks"]] == ["a", "c"]


def test_asymmetric_matrix(tmp_path, capsys):
    path = write(tmp_path / "bad.json", {"dim": 2, "A": [[1.0, 2.0], [0.0, 1.0]], "c": 1.0})
    assert main(["classify", "--input", path]) == 2
    assert "A[0][1]/A[1][0]" in capsys.readouterr().err


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"dim": 2, "A": [[1, 0], [0, 1]', encoding="utf-8")
    assert main(["check", "--input", str(path)]) == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["check", "--input", str(tmp_path / "absent.json")]) == 2


def test_dimension_mismatch(tmp_path):
    path = write(tmp_path / "mismatch.json", {"dim": 4, "A": [[1.0, 0.0], [0.0, 1.0]], "c": 1.0})
    assert main(["classify", "--input", path]) == 2


def test_non_semisimple_is_unresolved(tmp_path, capsys):
    A = normal_form(HormanderBlock.hyperbolic(2, 1.0)).A.tolist()
    path = write(tmp_path / "jordan.json", {"dim": 4, "A": A, "c": 1.0})
    assert main(["check", "--input", path]) == 3
    assert json.loads(capsys.readouterr().out)["overall"] == "unresolved"
    assert main(["classify", "--input", path]) == 3


def test_resonant_orbits_are_unresolved(tmp_path):
    path = write(tmp_path / "round.json", {"dim": 4, "A": [[float(i == j) for j in range(4)] for i in range(4)], "c": 1.0})
    assert main(["orbits", "--input", path]) == 3


@pytest.mark.parametrize(
    "flags",
    [
        ["--N", "48"],
        ["--N", "2048"],
        ["--k-max", "0"],
        ["--k-max", "65"],
        ["--s-max", "-1"],
        ["--jobs", "0"],
    ],
)
def test_option_ranges(h_ex_file, flags):
    assert main(["flow", "--input", h_ex_file, *flags]) == 2


def test_run_config_validation():
    with pytest.raises(ValidationError):
        RunConfig(command="plot", input="h.json")
    assert RunConfig(command="flow", input="h.json", N=1024).N == 1024


def test_flow_with_snapshots(h_ex_file, tmp_path):
    output = tmp_path / "flow.json"
    snapshots = tmp_path / "snapshots"
    status = main(
        [
            "flow",
            "--input", h_ex_file,
            "--k-max", "1",
            "--s-max", "0.1",
            "--output", str(output),
            "--snapshots", str(snapshots),
            "--jobs", "2",
        ]
    )
    assert status == 0
    runs = json.loads(output.read_text(encoding="utf-8"))["runs"]
    assert len(runs) == 2
    for run in runs:
        assert run["escaped"] is False
        assert all(b >= a - 1e-9 for a, b in zip(run["action_series"], run["action_series"][1:]))
    state = codec.read_snapshot((snapshots / "run1_step0.rflo").read_bytes())
    assert state.N == 64 and state.dim == 4


def test_flow_from_loop_file(h_ex_file, tmp_path, capsys):
    output = tmp_path / "flow.json"
    assert main(["flow", "--input", h_ex_file, "--k-max", "1", "--s-max", "0.05", "--output", str(output)]) == 0
    finals = [run["final"] for run in json.loads(output.read_text(encoding="utf-8"))["runs"]]
    loops = write(tmp_path / "loops.json", finals)
    assert main(["flow", "--input", h_ex_file, "--loops", loops, "--s-max", "0.05"]) == 0
    assert len(json.loads(capsys.readouterr().out)["runs"]) == 2


def test_report_is_byte_identical(h_ex_file, tmp_path):
    outputs = [tmp_path / "first.json", tmp_path / "second.json"]
    for output in outputs:
        flags = ["--k-max", "1", "--s-max", "0.05", "--output", str(output)]
        assert main(["report", "--input", h_ex_file, *flags]) == 0
    first, second = (output.read_bytes() for output in outputs)
    assert first == second
    document = json.loads(first)
    assert document["tentacular"]["overall"] == "strongly_tentacular"
    assert len(document["orbits"]["orbits"]) == 2
    assert len(document["flow"]["runs"]) == 2
    assert "errors" not in document


def test_report_without_orbits(tmp_path):
    path = write(tmp_path / "zero.json", {"dim": 2, "A": [[0.0, 1.0], [1.0, 0.0]], "c": 0.0})
    output = tmp_path / "report.json"
    assert main(["report", "--input", path, "--output", str(output)]) == 0
    document = json.loads(output.read_text(encoding="utf-8"))
    assert set(document["errors"]) == {"orbits", "flow"}
    assert document["tentacular"]["overall"] == "criteria_not_met"


def test_log_level_from_environment(h_ex_file, monkeypatch, capsys):
    monkeypatch.setenv("TENTACLE_LOG", "loud")
    assert main(["classify", "--input", h_ex_file]) == 0


def test_flow_keeps_higher_iterates(h_ex_file, tmp_path):
    output = tmp_path / "flow.json"
    flags = ["--k-max", "3", "--perturbation", "0", "--s-max", "0.1", "--output", str(output)]
    assert main(["flow", "--input", h_ex_file, *flags]) == 0
    runs = json.loads(output.read_text(encoding="utf-8"))["runs"]
    assert len(runs) == 6
    for run in runs:
        radius = max(math.hypot(row[0], row[2]) for row in run["final"]["v"])
        assert radius == pytest.approx(1.0, abs=1e-6)


def test_numerical_breakdown_writes_a_document(h_ex_file, monkeypatch, capsys):
    def breakdown(H):
        raise SpectralSymmetryError("eigenvalues do not form symmetric families")

    monkeypatch.setattr("tentacle.cli.classify", breakdown)
    assert main(["classify", "--input", h_ex_file]) == 3
    captured = capsys.readouterr()
    assert json.loads(captured.out) == {"error": "eigenvalues do not form symmetric families"}
    assert "[unresolved]" in captured.err
