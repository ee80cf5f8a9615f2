import json

import pytest

from wander_lab import cli
from wander_lab.errors import ScenarioError
from wander_lab.innerseq import MapSequence
from wander_lab.powertower import CoveringTower

BUNDLED = cli.bundled_scenarios()


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc, indent=2))
    return p


def minimal(payload, name="t"):
    return {"schema_version": 1, "name": name, "payload": payload}


def strip(report):
    report = json.loads(cli.dumps(report))
    for key in ("timestamp", "wall_time"):
        report["provenance"].pop(key)
    return report


class TestIngest:
    @pytest.mark.parametrize("name", BUNDLED)
    def test_roundtrip(self, name, tmp_path):
        s = cli.ingest(cli.bundled_path(name))
        again = cli.ingest(write(tmp_path, cli.serialize(s)))
        assert again == s
        assert again.digest == s.digest

    def test_minimal_constant_blaschke(self, tmp_path):
        doc = minimal({"inner_sequence": {"rule": "constant", "map": {"zeros": [[0, 0], [-0.5, 0]]}}})
        s = cli.ingest(write(tmp_path, doc))
        assert isinstance(s.payload, MapSequence)
        seq = s.payload
        assert seq.rule == "constant"
        assert seq[0] == seq[9]
        assert seq[0].degree == 2 and seq.tail_meta.lambda_floor == pytest.approx(0.5)

    def test_tower(self, tmp_path):
        doc = minimal({"covering_tower": {"kind": "annulus", "mu0": 0.3, "degrees": {"kind": "constant", "params": [2]}}})
        t = cli.ingest(write(tmp_path, doc)).payload
        assert isinstance(t, CoveringTower)
        assert t.degree(7) == 2

    def test_bad_zero_names_index(self, tmp_path):
        doc = minimal({"inner_sequence": {"rule": "constant", "map": {"zeros": [[0, 0], [1.2, 0]]}}})
        with pytest.raises(ScenarioError, match=r"zeros\[1\]"):
            cli.ingest(write(tmp_path, doc))

    def test_bad_component_names_index(self, tmp_path):
        doc = minimal({"component_list": {"components": [
            {"kind": "PuncturedDisc", "relation": "Indiscrete"},
            {"kind": "SimplyConnectedPiece", "relation": "Indiscrete"},
        ]}})
        with pytest.raises(ScenarioError, match=r"components\[1\]"):
            cli.ingest(write(tmp_path, doc))

    def test_schema_version(self, tmp_path):
        doc = minimal({"component_list": {"components": []}})
        doc["schema_version"] = 7
        with pytest.raises(ScenarioError, match="schema_version"):
            cli.ingest(write(tmp_path, doc))

    def test_parse_error_location(self, tmp_path):
        with pytest.raises(ScenarioError, match=r"line 3, column"):
            cli.ingest(write(tmp_path, '{\n  "schema_version": 1,\n  "name": oops\n}'))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            cli.ingest(tmp_path / "absent.json")

    def test_unknown_payload(self, tmp_path):
        with pytest.raises(ScenarioError, match="payload"):
            cli.ingest(write(tmp_path, minimal({"mystery": {}})))

    def test_config_keys(self, tmp_path):
        assert cli.load_config(write(tmp_path, {"max_m": 8, "seed": 3}, "c.json")) == {"max_m": 8, "seed": 3}
        with pytest.raises(ScenarioError, match="unknown config"):
            cli.load_config(write(tmp_path, {"colour": 1}, "c.json"))


def bundled(name):
    return cli.ingest(cli.bundled_path(name + ".json"))


class TestRun:
    def test_classify_contracting(self):
        report, code, _ = cli.run("classify", bundled("linear_045"))
        assert code == 0
        assert report["results"]["classification"]["verdict"] == "Contracting"

    def test_teich_dim(self):
        report, code, _ = cli.run("teich-dim", bundled("one_annulus_two_punctured"))
        assert code == 0
        assert report["results"]["dimension"]["value"] == "Finite(1)"

    def test_linearize_truncated(self):
        report, code, _ = cli.run("linearize", bundled("semi_contracting"), {"max_m": 2})
        assert code == 2
        assert "NonConvergent" in json.dumps(report["results"])

    def test_linearize_table(self):
        _, code, tables = cli.run("linearize", bundled("autonomous_koenigs"))
        assert code == 0
        header, rows = tables["linearize"]
        assert header == ["z_re", "z_im", "phi_re", "phi_im", "residual"]
        assert rows and all(len(r) == 5 for r in rows)

    def test_wrong_payload_is_error(self):
        _, code, _ = cli.run("tower-verify", bundled("linear_045"))
        assert code == 1

    def test_unknown_command(self):
        with pytest.raises(ScenarioError):
            cli.run("dance", bundled("linear_045"))

    @pytest.mark.parametrize("name", ["autonomous_koenigs", "power_tower_d2", "mixed_components"])
    def test_deterministic(self, name):
        s = bundled(name)
        a, _, _ = cli.run("all", s, {"seed": 5})
        b, _, _ = cli.run("all", s, {"seed": 5})
        assert strip(a) == strip(b)
        assert a["scenario"]["hash"] == s.digest

    def test_provenance(self):
        report, _, _ = cli.run("classify", bundled("linear_045"), {"tolerance": 1e-9})
        prov = report["provenance"]
        assert prov["config"] == {"tolerance": 1e-9}
        assert prov["backend"] in ("numba", "numpy")
        assert set(prov) >= {"version", "wall_time", "timestamp"}

    def test_explicit_prefix_undetermined(self):
        _, code, _ = cli.run("all", bundled("explicit_prefix"))
        assert code == 2


class TestMain:
    def test_writes_report_and_tables(self, tmp_path, capsys):
        code = cli.main(["linearize", "--scenario", "autonomous_koenigs", "--out", str(tmp_path)])
        assert code == 0
        report = json.loads((tmp_path / "autonomous_koenigs.linearize.json").read_text())
        assert report["exit_code"] == 0
        tsv = (tmp_path / "autonomous_koenigs.linearize.tsv").read_text(encoding="utf-8").splitlines()
        assert tsv[0].split("\t") == ["z_re", "z_im", "phi_re", "phi_im", "residual"]
        assert all(len(line.split("\t")) == 5 for line in tsv[1:])

    def test_stdout(self, capsys):
        assert cli.main(["teich-dim", "--scenario", "discrete_piece"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["results"]["dimension"]["value"] == "Infinite"

    def test_config_file(self, tmp_path, capsys):
        cfg = write(tmp_path, {"max_m": 2}, "c.json")
        assert cli.main(["linearize", "--scenario", "semi_contracting", "--config", str(cfg)]) == 2

    def test_errors_exit_one(self, tmp_path, capsys):
        assert cli.main(["classify", "--scenario", str(tmp_path / "nope.json")]) == 1
        assert cli.main(["classify"]) == 1
        assert "error" in capsys.readouterr().err

    def test_list(self, capsys):
        assert cli.main(["list"]) == 0
        assert "power_tower_d2.json" in capsys.readouterr().out
