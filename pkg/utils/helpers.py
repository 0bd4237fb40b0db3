"""Helper utilities for command input and report formatting"""
from modules.charges import ChargeLabel
from modules.errors import ValidationError
from config.settings import ProtocolDefaults


class InputValidator:
    """Parsing and validation of command-line values"""

    @staticmethod
    def parse_label(text, d):
        """Parse a charge label string and check it exists for dimension d"""
        if not text:
            raise ValidationError("a charge label is required, e.g. 'z:1:1'")
        return ChargeLabel.parse(text).validate(d)

    @staticmethod
    def parse_s_list(text):
        """Comma-separated battery widths, e.g. "0.3,0.1,0.03" """
        if text is None:
            return list(ProtocolDefaults.DEFAULT_SWEEP)
        try:
            values = [float(part) for part in str(text).split(",") if part.strip()]
        except ValueError as exc:
            raise ValidationError(f"invalid s list {text!r}: {exc}") from exc
        if not values:
            raise ValidationError("s list is empty")
        if any(not value > 0 for value in values):
            raise ValidationError(f"s values must be positive, got {values}")
        return values


class DataFormatter:
    """Data formatting utilities"""

    @staticmethod
    def format_error(value):
        """Scientific notation for small errors, N/A when missing"""
        if value is None:
            return "N/A"
        if value == 0:
            return "0"
        return f"{value:.3e}"

    @staticmethod
    def format_work_table(ledger):
        """One line per charge: label, work and epsilon"""
        lines = [f"{'label':<10}{'work':>22}{'epsilon':>14}"]
        for entry in ledger.entries:
            lines.append(f"{str(entry.label):<10}{entry.work:>22.15f}{DataFormatter.format_error(entry.epsilon):>14}")
        return "\n".join(lines)

    @staticmethod
    def format_verdict(report):
        if report.isolated:
            return f"isolated (all commutator norms <= {report.tol:g})"
        worst = max(zip(report.commutator_norms, report.labels))
        return f"leaky (largest commutator {worst[0]:.3e} for {worst[1]})"
