"""Export utilities for protocol results"""
import json
import logging
import os

import numpy as np

from config.settings import ProtocolDefaults
from modules.channel_tomography import ChoiMatrix, QuantumChannel
from modules.errors import ValidationError
from modules.quantum_core import as_matrix

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


def _number(value):
    """Plain Python float/int so json writes the shortest round-trip repr"""
    if value is None:
        return None
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


class ExportManager:
    """JSON and CSV encoding of states, ledgers, reports and sweeps"""

    @staticmethod
    def encode_matrix(matrix):
        m = as_matrix(matrix)
        return {
            "rows": int(m.shape[0]),
            "cols": int(m.shape[1]),
            "data": [[float(z.real), float(z.imag)] for z in m.reshape(-1)],
        }

    @staticmethod
    def decode_matrix(obj):
        try:
            rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed matrix object: {exc}") from exc
        if rows < 1 or cols < 1 or len(data) != rows * cols:
            raise ValidationError(f"matrix data has {len(data)} entries, expected {rows}x{cols}")
        try:
            values = [complex(float(re), float(im)) for re, im in data]
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"matrix entries must be [re, im] pairs: {exc}") from exc
        if not all(np.isfinite(z) for z in values):
            raise ValidationError("matrix entries must be finite")
        return np.array(values, dtype=np.complex128).reshape(rows, cols)

    @staticmethod
    def render_json(payload):
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"

    def export_to_json(self, payload, filename):
        """Write a payload to ``filename``; keys keep their insertion order"""
        directory = os.path.dirname(filename)
        if directory and not os.path.exists(directory):
            os.makedirs(directory)
        with open(filename, "w", encoding="utf-8") as f:
            f.write(self.render_json(payload))
        logger.info("wrote %s", filename)
        return filename

    @staticmethod
    def load_json(filename):
        with open(filename, "r", encoding="utf-8") as f:
            return json.load(f)

    def load_matrix(self, filename):
        return self.decode_matrix(self.load_json(filename))

    def charges_payload(self, charge_set):
        """Charge-set file body; every matrix is checked traceless on the way out"""
        entries = []
        for label, observable in charge_set:
            trace = abs(np.trace(observable.matrix))
            if trace > 1e-12:
                raise ValidationError(f"charge {label} has trace {trace:.3e}")
            entries.append({"label": str(label), "matrix": self.encode_matrix(observable)})
        return {"d": charge_set.d, "charges": entries}

    def load_charges(self, filename):
        """(label, matrix) pairs from a charge-set file"""
        data = self.load_json(filename)
        try:
            return [(item["label"], self.decode_matrix(item["matrix"])) for item in data["charges"]]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed charge-set file: {exc}") from exc

    def load_channel(self, filename):
        data = self.load_json(filename)
        try:
            d, kraus = int(data["d"]), data["kraus"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed channel file: {exc}") from exc
        channel = QuantumChannel(tuple(self.decode_matrix(k) for k in kraus))
        if channel.d != d:
            raise ValidationError(f"channel file declares d={d} but Kraus operators are {channel.d}x{channel.d}")
        return channel

    def channel_payload(self, channel):
        return {"d": channel.d, "kraus": [self.encode_matrix(k) for k in channel.kraus]}

    def measure_payload(self, ledger, reconstructed, reconstruction_error, recovery_error):
        return {
            "ledger": ledger.to_dict(),
            "deltas": [record.to_dict() for record in ledger.charge_deltas()],
            "epsilon": {str(entry.label): entry.epsilon for entry in ledger.entries},
            "disturbance": {str(entry.label): _number(entry.disturbance) for entry in ledger.entries},
            "reconstructed": self.encode_matrix(reconstructed),
            "reconstruction_error": _number(reconstruction_error),
            "recovery_error": _number(recovery_error),
        }

    def choi_payload(self, choi, distance=None):
        payload = {"d": choi.d}
        payload.update(self.encode_matrix(choi.matrix))
        payload["marginal_deviation"] = _number(choi.marginal_deviation())
        payload["warning"] = choi.warning
        payload["distance"] = _number(distance)
        return payload

    def load_choi(self, filename):
        data = self.load_json(filename)
        if "d" not in data:
            raise ValidationError("Choi file lacks the 'd' field")
        return ChoiMatrix(int(data["d"]), self.decode_matrix(data))

    @staticmethod
    def sample_payload(label, n_samples, seed, estimate, stderr, exact):
        return {
            "label": str(label),
            "n_samples": int(n_samples),
            "seed": int(seed),
            "estimate": _number(estimate),
            "stderr": _number(stderr),
            "exact": _number(exact),
        }

    @staticmethod
    def export_to_csv(frame, filename):
        """Sweep table as CSV with 17 significant digits"""
        frame.to_csv(filename, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        logger.info("wrote %s", filename)
        return filename

    @staticmethod
    def render_csv(frame):
        return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")

    @staticmethod
    def generate_summary_report(results):
        """Generate a human-readable summary report"""
        analyses = results.get("results", {})
        summary = f"""
=== MEASUREMENT AUDIT SUMMARY REPORT ===
Dimension: {results.get('d', 'Unknown')}
Profile: {_profile_line(results.get('profile'))}
Mode: {results.get('mode', 'Unknown')}

=== STATE RECONSTRUCTION ===
"""
        measure = analyses.get("measure", {})
        if measure and "error" not in measure:
            summary += f"Max epsilon: {measure['max_epsilon']:.3e}\n"
            summary += f"Reconstruction error: {measure['reconstruction_error']:.3e}\n"
            summary += f"Recovery error: {measure['recovery_error']:.3e}\n"
            if "closed_form_gap" in measure:
                summary += f"Closed-form delta gap: {measure['closed_form_gap']:.3e}\n"
        else:
            summary += f"Reconstruction not available{_reason(measure)}\n"

        summary += "\n=== INFORMATION ISOLATION ===\n"
        isolation = analyses.get("isolation", {})
        if isolation and "error" not in isolation:
            summary += f"Verdict: {isolation['verdict']}\n"
            summary += f"Largest commutator norm: {max(isolation['commutator_norms'].values()):.3e}\n"
        else:
            summary += f"Isolation data not available{_reason(isolation)}\n"

        summary += "\n=== EPSILON SWEEP ===\n"
        sweep = analyses.get("sweep", {})
        if sweep and "error" not in sweep:
            for row in sweep["rows"]:
                summary += f"s={row['s']:<8g} max_epsilon={row['max_epsilon']:.3e} error={row['reconstruction_error']:.3e}\n"
        else:
            summary += f"Sweep data not available{_reason(sweep)}\n"

        summary += "\n=== SAMPLED WORK ===\n"
        sample = analyses.get("sample", {})
        if sample and "error" not in sample:
            summary += (
                f"{sample['label']}: {sample['estimate']:.6f} ± {sample['stderr']:.2e}"
                f" (exact {sample['exact']:.6f}, N={sample['n_samples']})\n"
            )
        else:
            summary += f"Sampling data not available{_reason(sample)}\n"
        return summary


def _reason(section):
    return f" ({section['error']})" if section and "error" in section else ""


def _profile_line(profile):
    if not profile:
        return "custom"
    description = ProtocolDefaults.get_profile_description(profile)
    return f"{profile} ({description})" if description else profile
