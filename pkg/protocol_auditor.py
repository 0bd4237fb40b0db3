"""Core protocol auditor: runs a selection of analyses on one system state"""
import logging
import os
import sys

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config.settings import ProtocolDefaults
from modules.battery import BatteryProtocol, epsilon_sweep
from modules.charges import build_charge_set, canonical_labels
from modules.errors import ProtocolError
from modules.isolation import IsolationChecker
from modules.measurement import MeasurementAnalyzer, build_measurement_unitary, initial_sa_state, system_dim
from modules.quantum_core import trace_distance
from utils.export import ExportManager

logger = logging.getLogger(__name__)

ANALYSES = ('measure', 'isolation', 'sweep', 'sample')


class ProtocolAuditor:
    def __init__(self, run_config, profile=None):
        self.run_config = run_config
        self.profile = profile
        self.export_manager = ExportManager()

    def comprehensive_audit(self, rho_S, selected_analyses=None, s_values=None, sample_label=None):
        """Run the selected analyses; a failing analysis records its error and the rest still run"""
        if selected_analyses is None:
            selected_analyses = {name: True for name in ANALYSES}

        try:
            d = system_dim(rho_S)
        except ProtocolError as e:
            return {'error': f'Invalid input state: {e}'}
        if d != self.run_config.d:
            return {'error': f'State dimension {d} does not match configured d={self.run_config.d}'}

        config = self.run_config.to_protocol_config()
        audit_results = {
            'd': d,
            'mode': config.mode,
            'profile': self.profile,
            'selected_analyses': selected_analyses,
            'results': {}
        }
        runners = {
            'measure': lambda: self._measure(rho_S, config),
            'isolation': lambda: self._isolation(rho_S),
            'sweep': lambda: self._sweep(rho_S, config, s_values),
            'sample': lambda: self._sample(rho_S, config, sample_label),
        }
        for name in ANALYSES:
            if not selected_analyses.get(name, False):
                continue
            logger.debug("audit analysis %s", name)
            try:
                audit_results['results'][name] = runners[name]()
            except ProtocolError as e:
                logger.warning("analysis %s failed: %s", name, e)
                audit_results['results'][name] = {'error': str(e)}
        return audit_results

    def _measure(self, rho_S, config):
        if config.mode == 'ideal':
            results = MeasurementAnalyzer().analyze_state(rho_S)
            results['max_epsilon'] = 0.0
            return results
        ledger, reconstructed, recovered, _ = BatteryProtocol(config).run(rho_S)
        return {
            'ledger': ledger.to_dict(),
            'max_epsilon': ledger.max_epsilon(),
            'reconstruction_error': trace_distance(reconstructed, rho_S),
            'recovery_error': trace_distance(recovered, initial_sa_state(rho_S)),
        }

    def _isolation(self, rho_S):
        report = IsolationChecker(self.run_config.tol).analyze_process(
            build_measurement_unitary(self.run_config.d),
            build_charge_set(self.run_config.d),
            initial_sa_state(rho_S),
        )
        return report.to_dict()

    def _sweep(self, rho_S, config, s_values):
        s_values = list(s_values or ProtocolDefaults.DEFAULT_SWEEP)
        frame = epsilon_sweep(rho_S, s_values, config, include_ideal=True)
        rows = [{key: float(value) for key, value in row.items()} for row in frame.to_dict(orient='records')]
        return {'rows': rows}

    def _sample(self, rho_S, config, sample_label):
        label = sample_label or canonical_labels(config.d)[0]
        entry, exact = BatteryProtocol(config).sample_round(rho_S, label, self.run_config.n_samples)
        return self.export_manager.sample_payload(
            entry.label, entry.n_samples, config.seed, entry.work, entry.stderr, exact
        )

    def generate_summary_report(self, audit_results):
        """Generate a summary report from audit results"""
        if 'error' in audit_results:
            return f"Audit failed: {audit_results['error']}"
        return self.export_manager.generate_summary_report(audit_results)
