"""Command-line entry point for the collapse-free measurement protocol.

Exit codes: 0 success, 2 input or validation error, 3 battery containment error.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config.settings import ProtocolDefaults, RunConfig
from modules.battery import BatteryProtocol, epsilon_sweep
from modules.channel_tomography import ChannelTomographer
from modules.charges import build_charge_set
from modules.errors import ContainmentError, ValidationError
from modules.isolation import IsolationChecker
from modules.measurement import initial_sa_state
from modules.quantum_core import DensityMatrix, HermitianObservable, UnitaryOperator, trace_distance
from protocol_auditor import ANALYSES, ProtocolAuditor
from utils.export import ExportManager
from utils.helpers import DataFormatter, InputValidator

logger = logging.getLogger("measure_cli")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONTAINMENT = 3

# flag name -> RunConfig key
CONFIG_FLAGS = {
    "d": "d",
    "mode": "mode",
    "s": "s",
    "gamma": "gamma",
    "grid_l": "grid_l",
    "p_max": "p_max",
    "seed": "seed",
    "n": "n_samples",
    "tol": "tol",
    "workers": "workers",
}


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("run configuration")
    group.add_argument("--d", type=int, help="system dimension")
    group.add_argument("--mode", choices=ProtocolDefaults.MODES, help="ideal unitary or battery-mediated rounds")
    group.add_argument("--s", type=float, help="battery momentum width")
    group.add_argument("--gamma", type=float, help="battery charge scale")
    group.add_argument("--grid-l", type=int, help="momentum grid size (power of two)")
    group.add_argument("--p-max", type=float, help="momentum cutoff (default 10*s)")
    group.add_argument("--seed", type=int, help="random seed")
    group.add_argument("--n", type=int, help="number of sampled battery copies")
    group.add_argument("--tol", type=float, help="isolation tolerance")
    group.add_argument("--workers", type=int, help="threads for independent rounds")
    group.add_argument("--config", help="JSON file of configuration values (flags win)")
    group.add_argument("--profile", choices=sorted(ProtocolDefaults.RUN_PROFILES), help="named run profile")
    group.add_argument("--out", help="output file (default: stdout)")
    group.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeat for debug)")
    group.add_argument("--quiet", action="store_true", help="only log errors")
    return common


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="measure_cli.py",
        description=ProtocolDefaults.APP_DESCRIPTION,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("charges", parents=[common], help="write the charge set for dimension d")

    measure = sub.add_parser("measure", parents=[common], help="work ledger and reconstruction of a state")
    measure.add_argument("state", help="density matrix JSON file")

    sweep = sub.add_parser("sweep", parents=[common], help="epsilon versus battery width, as CSV")
    sweep.add_argument("state", help="density matrix JSON file")
    sweep.add_argument("--s-list", help="comma-separated widths (default %s)" % ",".join(map(str, ProtocolDefaults.DEFAULT_SWEEP)))
    sweep.add_argument("--include-ideal", action="store_true", help="append the s=0 ideal-mode row")

    isolation = sub.add_parser("isolation", parents=[common], help="information isolation of a unitary")
    isolation.add_argument("unitary", help="unitary matrix JSON file")
    isolation.add_argument("--charges", help="charge-set JSON file (default: the charge set for --d)")
    isolation.add_argument("--state", help="density matrix JSON file for the charge-flow profile")

    channel = sub.add_parser("channel", parents=[common], help="Choi-state tomography of a channel")
    channel.add_argument("channel", help="channel JSON file with Kraus operators")
    channel.add_argument("--reference", help="channel JSON file to compare the reconstruction against")

    sample = sub.add_parser("sample", parents=[common], help="sampled battery work estimate for one charge")
    sample.add_argument("state", help="density matrix JSON file")
    sample.add_argument("--label", default="z:1:1", help="charge label, e.g. z:1:1")

    audit = sub.add_parser("audit", parents=[common], help="combined audit of a state")
    audit.add_argument("state", help="density matrix JSON file")
    audit.add_argument("--analyses", default=",".join(ANALYSES), help="comma-separated subset of %s" % ",".join(ANALYSES))
    audit.add_argument("--s-list", help="sweep widths for the sweep analysis")
    audit.add_argument("--label", help="charge label for the sample analysis")
    audit.add_argument("--summary", action="store_true", help="print the text summary instead of JSON")
    return parser


def configure_logging(args):
    if args.quiet:
        level = logging.ERROR
    elif args.verbose >= 2:
        level = logging.DEBUG
    elif args.verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def run_config_from_args(args, fallback_d=None):
    """Merge profile, --config file and flags into a validated RunConfig"""
    file_values = ExportManager.load_json(args.config) if args.config else {}
    if not isinstance(file_values, dict):
        raise ValidationError(f"config file {args.config} must hold a JSON object")
    flags = {key: getattr(args, flag) for flag, key in CONFIG_FLAGS.items()}
    if flags["d"] is None and "d" not in file_values and fallback_d is not None:
        flags["d"] = fallback_d
    return RunConfig.from_sources(file_values, flags, args.profile)


def _load_state(exporter, path):
    return DensityMatrix(exporter.load_matrix(path))


def _state_config(args, state):
    config = run_config_from_args(args, fallback_d=state.dim)
    if config.d != state.dim:
        raise ValidationError(f"state has dimension {state.dim} but d={config.d} was requested")
    return config


def _emit(exporter, args, payload):
    if args.out:
        exporter.export_to_json(payload, args.out)
    else:
        sys.stdout.write(exporter.render_json(payload))


def cmd_charges(args, exporter):
    config = run_config_from_args(args)
    _emit(exporter, args, exporter.charges_payload(build_charge_set(config.d)))


def cmd_measure(args, exporter):
    state = _load_state(exporter, args.state)
    config = _state_config(args, state)
    ledger, reconstructed, recovered, _ = BatteryProtocol(config.to_protocol_config()).run(state)
    logger.info("work ledger\n%s", DataFormatter.format_work_table(ledger))
    payload = exporter.measure_payload(
        ledger,
        reconstructed,
        trace_distance(reconstructed, state),
        trace_distance(recovered, initial_sa_state(state)),
    )
    _emit(exporter, args, payload)


def cmd_sweep(args, exporter):
    state = _load_state(exporter, args.state)
    config = _state_config(args, state)
    s_values = InputValidator.parse_s_list(args.s_list)
    frame = epsilon_sweep(state, s_values, config.to_protocol_config(), include_ideal=args.include_ideal)
    if args.out:
        exporter.export_to_csv(frame, args.out)
    else:
        sys.stdout.write(exporter.render_csv(frame))


def cmd_isolation(args, exporter):
    unitary = UnitaryOperator(exporter.load_matrix(args.unitary))
    config = run_config_from_args(args)
    if args.charges:
        charges = [(label, HermitianObservable(m)) for label, m in exporter.load_charges(args.charges)]
    else:
        charges = build_charge_set(config.d)
    rho = _load_state(exporter, args.state) if args.state else None
    report = IsolationChecker(config.tol).analyze_process(unitary, charges, rho)
    logger.info("verdict: %s", DataFormatter.format_verdict(report))
    _emit(exporter, args, report.to_dict())


def cmd_channel(args, exporter):
    channel = exporter.load_channel(args.channel)
    reference = exporter.load_channel(args.reference) if args.reference else None
    config = run_config_from_args(args, fallback_d=channel.d)
    if config.d != channel.d:
        raise ValidationError(f"channel has dimension {channel.d} but d={config.d} was requested")
    results = ChannelTomographer(config.to_protocol_config(d=channel.d ** 2)).analyze_channel(channel, reference)
    _emit(exporter, args, exporter.choi_payload(results['choi'], results['distance']))


def cmd_sample(args, exporter):
    state = _load_state(exporter, args.state)
    config = _state_config(args, state)
    label = InputValidator.parse_label(args.label, config.d)
    protocol = BatteryProtocol(config.to_protocol_config())
    entry, exact = protocol.sample_round(state, label, config.n_samples)
    _emit(exporter, args, exporter.sample_payload(label, entry.n_samples, config.seed, entry.work, entry.stderr, exact))


def cmd_audit(args, exporter):
    state = _load_state(exporter, args.state)
    config = _state_config(args, state)
    requested = [name.strip() for name in args.analyses.split(",") if name.strip()]
    unknown = sorted(set(requested) - set(ANALYSES))
    if unknown:
        raise ValidationError(f"unknown analyses {unknown}; choose from {list(ANALYSES)}")
    label = InputValidator.parse_label(args.label, config.d) if args.label else None
    s_values = InputValidator.parse_s_list(args.s_list) if args.s_list else None
    auditor = ProtocolAuditor(config, profile=args.profile)
    results = auditor.comprehensive_audit(
        state,
        selected_analyses={name: name in requested for name in ANALYSES},
        s_values=s_values,
        sample_label=label,
    )
    if args.summary:
        sys.stdout.write(auditor.generate_summary_report(results))
    if args.out or not args.summary:
        _emit(exporter, args, results)


COMMANDS = {
    "charges": cmd_charges,
    "measure": cmd_measure,
    "sweep": cmd_sweep,
    "isolation": cmd_isolation,
    "channel": cmd_channel,
    "sample": cmd_sample,
    "audit": cmd_audit,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args)
    try:
        COMMANDS[args.command](args, ExportManager())
    except ContainmentError as e:
        logger.error("containment failure: %s", e)
        return EXIT_CONTAINMENT
    except (ValidationError, json.JSONDecodeError, np.linalg.LinAlgError, OSError) as e:
        logger.error("%s", e)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
