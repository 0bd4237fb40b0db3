import json

import numpy as np
import pytest

import measure_cli
from modules.channel_tomography import amplitude_damping_channel, identity_channel, unitary_channel
from modules.charges import build_charge_set, charge_by_label
from modules.measurement import build_measurement_unitary
from modules.quantum_core import matrix_exponential_hermitian
from utils.export import ExportManager

EXPORTER = ExportManager()


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


@pytest.fixture
def qubit_file(tmp_path, qubit_example):
    return write_json(tmp_path / "state.json", EXPORTER.encode_matrix(qubit_example))


def run(argv):
    return measure_cli.main([str(a) for a in argv])


class TestCharges:
    def test_qubit_charge_file(self, tmp_path):
        out = tmp_path / "charges.json"
        assert run(["charges", "--d", 2, "--out", out]) == 0
        data = json.loads(out.read_text())
        assert data["d"] == 2
        assert [c["label"] for c in data["charges"]] == ["z:1:1", "x:0:1", "y:0:1"]

    def test_qutrit_charges_are_traceless(self, tmp_path):
        out = tmp_path / "charges.json"
        assert run(["charges", "--d", 3, "--out", out]) == 0
        data = json.loads(out.read_text())
        assert len(data["charges"]) == 8
        for entry in data["charges"]:
            assert abs(np.trace(EXPORTER.decode_matrix(entry["matrix"]))) < 1e-12

    def test_bad_dimension_exits_2(self, tmp_path):
        assert run(["charges", "--d", 1, "--out", tmp_path / "c.json"]) == 2


class TestMeasure:
    def test_ideal_qubit_ledger(self, tmp_path, qubit_file):
        out = tmp_path / "ledger.json"
        assert run(["measure", qubit_file, "--mode", "ideal", "--out", out]) == 0
        data = json.loads(out.read_text())
        works = {e["label"]: e["work"] for e in data["ledger"]["entries"]}
        assert works["z:1:1"] == pytest.approx(0.4, abs=1e-12)
        assert data["reconstruction_error"] < 1e-10

    def test_battery_qubit_reconstruction(self, tmp_path, qubit_file):
        out = tmp_path / "ledger.json"
        assert run(["measure", qubit_file, "--mode", "battery", "--s", 0.001, "--out", out]) == 0
        data = json.loads(out.read_text())
        assert data["ledger"]["mode"] == "battery"
        assert data["reconstruction_error"] < 1e-3
        assert max(data["epsilon"].values()) < 1e-3

    def test_output_is_byte_identical_across_runs(self, tmp_path, qubit_file):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        assert run(["measure", qubit_file, "--mode", "battery", "--s", 0.1, "--out", first]) == 0
        assert run(["measure", qubit_file, "--mode", "battery", "--s", 0.1, "--workers", 3, "--out", second]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_malformed_json_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(["measure", bad]) == 2

    def test_invalid_state_exits_2(self, tmp_path):
        state = write_json(tmp_path / "state.json", EXPORTER.encode_matrix(np.eye(2)))
        assert run(["measure", state]) == 2

    @pytest.mark.parametrize("d", [2, 4])
    def test_non_finite_state_exits_2(self, tmp_path, d):
        matrix = np.full((d, d), np.nan)
        state = write_json(tmp_path / "state.json", EXPORTER.encode_matrix(matrix))
        assert run(["measure", state]) == 2

    def test_missing_file_exits_2(self, tmp_path):
        assert run(["measure", tmp_path / "nope.json"]) == 2

    def test_containment_failure_exits_3(self, qubit_file):
        assert run(["measure", qubit_file, "--mode", "battery", "--s", 0.05, "--p-max", 0.2]) == 3

    def test_config_file_and_flags(self, tmp_path, qubit_file):
        config = write_json(tmp_path / "config.json", {"mode": "battery", "s": 0.3})
        out = tmp_path / "ledger.json"
        assert run(["measure", qubit_file, "--config", config, "--s", 0.01, "--out", out]) == 0
        data = json.loads(out.read_text())
        assert data["ledger"]["s"] == 0.01
        assert data["ledger"]["mode"] == "battery"

    def test_unknown_config_key_exits_2(self, tmp_path, qubit_file):
        config = write_json(tmp_path / "config.json", {"temperature": 1.0})
        assert run(["measure", qubit_file, "--config", config]) == 2

    def test_dimension_conflict_exits_2(self, qubit_file):
        assert run(["measure", qubit_file, "--d", 3]) == 2

    def test_stdout_when_no_out(self, qubit_file, capsys):
        assert run(["measure", qubit_file]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["ledger"]["d"] == 2


class TestSweep:
    def test_sweep_csv(self, tmp_path, qubit_file):
        out = tmp_path / "sweep.csv"
        assert run(["sweep", qubit_file, "--s-list", "0.3,0.03", "--include-ideal", "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "s,max_epsilon,reconstruction_error"
        assert len(lines) == 4
        epsilons = [float(line.split(",")[1]) for line in lines[1:]]
        assert epsilons[0] > epsilons[1] > epsilons[2] == 0.0

    def test_explicit_p_max_applies_to_every_width(self, qubit_file):
        assert run(["sweep", qubit_file, "--s-list", "0.1", "--p-max", "0.5"]) == 3
        assert run(["sweep", qubit_file, "--s-list", "0.05", "--p-max", "0.5"]) == 0

    def test_bad_s_list_exits_2(self, qubit_file):
        assert run(["sweep", qubit_file, "--s-list", "0.1,0"]) == 2


class TestIsolation:
    def test_measurement_unitary_is_leaky(self, tmp_path):
        unitary = write_json(tmp_path / "u.json", EXPORTER.encode_matrix(build_measurement_unitary(2)))
        out = tmp_path / "iso.json"
        assert run(["isolation", unitary, "--d", 2, "--out", out]) == 0
        assert json.loads(out.read_text())["verdict"] == "leaky"

    def test_generated_unitary_is_isolated(self, tmp_path):
        q = charge_by_label(build_charge_set(2), "x:0:1")
        unitary = write_json(tmp_path / "u.json", EXPORTER.encode_matrix(matrix_exponential_hermitian(q, 0.7)))
        charges = write_json(
            tmp_path / "q.json", {"d": 2, "charges": [{"label": "x:0:1", "matrix": EXPORTER.encode_matrix(q)}]}
        )
        state = write_json(tmp_path / "rho.json", EXPORTER.encode_matrix(np.eye(4) / 4))
        out = tmp_path / "iso.json"
        assert run(["isolation", unitary, "--charges", charges, "--state", state, "--out", out]) == 0
        data = json.loads(out.read_text())
        assert data["verdict"] == "isolated"
        assert data["deltas"]["x:0:1"] == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch_exits_2(self, tmp_path):
        unitary = write_json(tmp_path / "u.json", EXPORTER.encode_matrix(np.eye(2)))
        assert run(["isolation", unitary, "--d", 2]) == 2


class TestChannel:
    def test_identity_channel_ideal(self, tmp_path):
        channel = write_json(tmp_path / "ch.json", EXPORTER.channel_payload(identity_channel(2)))
        out = tmp_path / "choi.json"
        assert run(["channel", channel, "--reference", channel, "--out", out]) == 0
        data = json.loads(out.read_text())
        assert data["d"] == 2
        assert data["rows"] == 4
        assert data["distance"] < 1e-10

    def test_incomplete_kraus_exits_2(self, tmp_path):
        payload = EXPORTER.channel_payload(amplitude_damping_channel(0.3))
        payload["kraus"] = payload["kraus"][:1]
        channel = write_json(tmp_path / "ch.json", payload)
        assert run(["channel", channel]) == 2

    def test_unitary_channel_against_identity(self, tmp_path):
        flip = np.array([[0, 1], [1, 0]])
        channel = write_json(tmp_path / "ch.json", EXPORTER.channel_payload(unitary_channel(flip)))
        reference = write_json(tmp_path / "ref.json", EXPORTER.channel_payload(identity_channel(2)))
        out = tmp_path / "choi.json"
        assert run(["channel", channel, "--reference", reference, "--out", out]) == 0
        assert json.loads(out.read_text())["distance"] == pytest.approx(1.0, abs=1e-10)


class TestSample:
    def test_sample_report(self, tmp_path, qubit_file):
        out = tmp_path / "sample.json"
        assert run(["sample", qubit_file, "--label", "z:1:1", "--n", 20000, "--seed", 4, "--out", out]) == 0
        data = json.loads(out.read_text())
        assert list(data) == ["label", "n_samples", "seed", "estimate", "stderr", "exact"]
        assert data["exact"] == pytest.approx(0.4, abs=1e-10)
        assert abs(data["estimate"] - data["exact"]) < 5 * data["stderr"]

    def test_bad_label_exits_2(self, qubit_file):
        assert run(["sample", qubit_file, "--label", "z:2:2"]) == 2


class TestAudit:
    def test_summary_output(self, qubit_file, capsys):
        assert run(["audit", qubit_file, "--analyses", "measure,isolation", "--summary"]) == 0
        text = capsys.readouterr().out
        assert "MEASUREMENT AUDIT SUMMARY REPORT" in text
        assert "Verdict: leaky" in text

    def test_unknown_analysis_exits_2(self, qubit_file):
        assert run(["audit", qubit_file, "--analyses", "measure,plot"]) == 2
