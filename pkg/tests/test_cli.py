import json

import pytest

from capax.cli import main, parse_domain


@pytest.fixture
def fig_file(tmp_path):
    path = tmp_path / "fig.json"
    path.write_text(json.dumps({
        "kind": "polygon", "orientation": "convex",
        "vertices": [["0", "0"], ["4", "0"], ["4", "1"], ["2", "3"], ["0", "4"]],
    }))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


class TestParseDomain:
    def test_shorthands(self):
        assert parse_domain("ball:3").a == 3
        d = parse_domain("ellipsoid:1,2")
        assert (d.a, d.b) == (1, 2)
        assert parse_domain("square:2").kind == "polygon"
        assert parse_domain("quarter_disk:1").curve == "quarter_disk"
        wl = parse_domain("weights:5;1,1,1")
        assert wl.head == 5 and wl.weights == (1, 1, 1)

    def test_float_constants(self):
        d = parse_domain("ellipsoid:1,phi", backend="float")
        assert float(d.b) == pytest.approx(1.618033988749895)


class TestCommands:
    def test_weights_fig(self, capsys, fig_file):
        code, out = run(capsys, "weights", "--domain", f"@{fig_file}")
        assert code == 0
        j = json.loads(out)
        assert j["head"] == "5" and j["weights"] == ["1", "1", "1"]

    def test_weights_ellipsoid_and_ball(self, capsys):
        code, out = run(capsys, "weights", "--domain", "ellipsoid:1,2")
        assert code == 0 and json.loads(out)["weights"] == ["1", "1"]
        code, out = run(capsys, "weights", "--domain", "ball:3")
        j = json.loads(out)
        assert code == 0 and j["head"] == "3" and j["weights"] == []

    def test_capacities_csv(self, capsys):
        code, out = run(capsys, "capacities", "--domain", "square:1",
                        "--kmax", "8", "--format", "csv")
        assert code == 0
        vals = [line.split(",")[1] for line in out.strip().splitlines()[2:]]
        assert vals == ["0", "1", "2", "2", "3", "3", "4", "4", "4"]
        code, out = run(capsys, "capacities", "--domain", "ball:1",
                        "--kmax", "6", "--format", "csv")
        vals = [line.split(",")[1] for line in out.strip().splitlines()[2:]]
        assert vals == ["0", "1", "1", "2", "2", "2", "3"]

    def test_capacities_oracle_verified(self, capsys, fig_file):
        code, out = run(capsys, "capacities", "--domain", f"@{fig_file}",
                        "--kmax", "1", "--oracle")
        assert code == 0
        j = json.loads(out)
        assert j["values"] == ["0", "4"]
        assert j["meta"]["oracle"] == "verified"

    def test_bounds_ball(self, capsys):
        code, out = run(capsys, "bounds", "--domain", "ball:1")
        j = json.loads(out)
        assert code == 0 and j["band"] == [-1.5, -0.5]

    def test_tower_square(self, capsys):
        code, out = run(capsys, "tower", "--domain", "square:1", "--format", "csv")
        assert code == 0
        rows = out.strip().splitlines()[2:]
        assert [r.split(",")[1] for r in rows] == ["4", "3", "2"]

    def test_errors_csv(self, capsys):
        code, out = run(capsys, "errors", "--domain", "ball:1", "--kmax", "16",
                        "--format", "csv")
        assert code == 0
        row = out.strip().splitlines()[4].split(",")  # k = 2
        assert row[0] == "2" and float(row[1]) == pytest.approx(-1.0)
        assert float(row[2]) == -1.5 and float(row[3]) == -0.5

    def test_errors_json_window(self, capsys):
        code, out = run(capsys, "errors", "--domain", "ball:1",
                        "--kmax", "4000", "--window", "1000:4000")
        assert code == 0
        j = json.loads(out)
        assert j["proven_convergent"] is False
        assert j["window"]["k0"] == 1000
        assert -1.51 <= j["window"]["min"] <= -1.45
        assert j["N_rational_edges"] == 1

    def test_obstruct_exit_codes(self, capsys):
        code, out = run(capsys, "obstruct", "--from", "ellipsoid:1,phi",
                        "--to", "ball:sqrt_phi", "--kmax", "200",
                        "--backend", "float")
        assert code == 2
        j = json.loads(out)
        assert j["verdict"] == "OBSTRUCTED"
        assert any(w["criterion"] == "affine_length" for w in j["witnesses"])
        code, _ = run(capsys, "obstruct", "--from", "ball:1", "--to", "ball:1")
        assert code == 0

    def test_error_exit_is_one(self, capsys):
        code = main(["capacities", "--domain", "nonsense:1"])
        assert code == 1

    def test_selfcheck(self, capsys):
        code, out = run(capsys, "selfcheck")
        assert code == 0
        assert "FAIL" not in out

    def test_quadratic_backend_file(self, capsys, tmp_path):
        path = tmp_path / "phi.json"
        path.write_text(json.dumps({
            "kind": "polygon", "orientation": "concave", "field_d": 5,
            "vertices": [["0", "0"], ["1", "0"], ["0", "1/2+1/2*sqrt"]],
        }))
        code, out = run(capsys, "weights", "--domain", f"@{path}",
                        "--eps", "1e-3")
        assert code == 0
        j = json.loads(out)
        assert j["backend"] == "sqrt:5"
        assert j["weights"][0] == "1"
        assert j["weights"][1] == "-1/2+1/2*sqrt"  # the golden ratio minus one
        assert j["truncation"]["complete"] is False


class TestDeterminism:
    def test_threads_do_not_change_output(self, capsys):
        _, out1 = run(capsys, "capacities", "--domain", "ellipsoid:1,2",
                      "--kmax", "64", "--threads", "1", "--format", "csv")
        _, out8 = run(capsys, "capacities", "--domain", "ellipsoid:1,2",
                      "--kmax", "64", "--threads", "8", "--format", "csv")
        assert out1 == out8

    def test_repeat_runs_identical(self, capsys, fig_file):
        _, a = run(capsys, "tower", "--domain", f"@{fig_file}")
        _, b = run(capsys, "tower", "--domain", f"@{fig_file}")
        assert a == b

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "caps.csv"
        code = main(["capacities", "--domain", "ball:2", "--kmax", "3",
                     "--format", "csv", "--out", str(target)])
        assert code == 0
        assert target.read_text().splitlines()[2] == "0,0,0.0,0.0,ball_closed_form"


class TestRoundTrip:
    def test_capacities_json_reparses(self, capsys):
        from capax.capacities import CapacitySeries
        _, out = run(capsys, "capacities", "--domain", "ellipsoid:1,2", "--kmax", "6")
        series = CapacitySeries.from_json(json.loads(out))
        assert [str(v) for v in series.values] == ["0", "1", "2", "2", "3", "3", "4"]
