"""Command-line front end.

Every pipeline stage is a subcommand driven by a config file, writing
deterministic CSV and key-value artifacts (and, with --plot, matplotlib
figures) into the output directory.  Files are written to temporary
names and renamed on success, so failures leave no partial artifacts.

Exit codes: 0 success, 2 configuration error, 3 domain error,
4 unreachable target / non-convergence during translation.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from fluxgate import spin_model, dynamics, gate, circuit
from fluxgate.config import ConfigError, load_config


class DomainError(Exception):
    """Invalid physical values for a command (exit code 3)."""


def _format_value(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.16e}"
    return str(v)


def _write_text(path, text):
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".",
                               prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows, footer=None):
    """CSV with 17-significant-digit scientific values, atomic rename."""
    lines = [",".join(header)]
    for row in np.atleast_2d(np.asarray(rows, dtype=float)):
        lines.append(",".join(f"{v:.16e}" for v in row))
    if footer:
        lines.extend(footer)
    _write_text(path, "\n".join(lines) + "\n")


def write_report(path, items):
    """Flat key-value text block (key=value per line), atomic rename."""
    _write_text(path, "".join(f"{k}={_format_value(v)}\n"
                              for k, v in items))


def _s_grid(cfg):
    n = cfg.get("sweep", "s_points", 401)
    if n < 1:
        raise DomainError(f"s_points must be >= 1, got {n}")
    return np.linspace(0.0, 1.0, n)


def _tf_grid(cfg):
    lo = cfg.get("sweep", "tf_min", 5.0)
    hi = cfg.get("sweep", "tf_max", 500.0)
    n = cfg.get("sweep", "tf_points", 100)
    if n < 1:
        raise DomainError(f"tf_points must be >= 1, got {n}")
    if not 0.0 < lo <= hi:
        raise DomainError(f"need 0 < tf_min <= tf_max, got {lo}, {hi}")
    return np.linspace(lo, hi, n)


def cmd_schedule(cfg, out, plot):
    params = cfg.spin_params()
    grid = _s_grid(cfg)
    table = np.empty((len(grid), 4))
    for i, s in enumerate(grid):
        g = spin_model.schedule_eval(params, s)
        table[i] = (s, g.gd1, g.gd2, g.gp)
    write_csv(os.path.join(out, "schedule.csv"),
              ["s", "gd1", "gd2", "gp"], table)
    if plot:
        from fluxgate import plots
        plots.plot_schedule(table, os.path.join(out, "schedule.png"))


def cmd_levels(cfg, out, plot):
    params = cfg.spin_params()
    table = spin_model.spectrum_trace(params, _s_grid(cfg))
    write_csv(os.path.join(out, "levels.csv"),
              ["s", "E0", "E1", "E2", "E3"], table)
    if plot:
        from fluxgate import plots
        plots.plot_levels(table, os.path.join(out, "levels.png"))


def cmd_gaps(cfg, out, plot):
    params = cfg.spin_params()
    grid = _s_grid(cfg)
    grid = grid[grid > params.s1]
    if len(grid) == 0:
        raise DomainError("no grid points in (s1, 1]; increase s_points")
    report = spin_model.find_s_star(params)
    table = np.empty((len(grid), 4))
    for i, s in enumerate(grid):
        table[i] = (s, spin_model.gap_exact(params, s),
                    spin_model.gap_approx(params, s),
                    spin_model.gap_tilde(params, s))
    write_csv(os.path.join(out, "gaps.csv"),
              ["s", "gap_exact", "gap_approx", "gap_tilde"], table,
              footer=[f"s_star={report.s_star:.16e}"])
    if plot:
        from fluxgate import plots
        plots.plot_gaps(table, report.s_star, os.path.join(out, "gaps.png"))


def cmd_oscillation(cfg, out, plot):
    params = cfg.spin_params()
    table = dynamics.ground_population_sweep(params, _tf_grid(cfg))
    write_csv(os.path.join(out, "oscillation.csv"), ["t_f", "P0"], table)
    if plot:
        from fluxgate import plots
        plots.plot_oscillation(table, os.path.join(out, "oscillation.png"))


def _emit_gate_outputs(cfg, out, plot, params, report, extra=()):
    w = report.waveform
    n_trace = cfg.get("sweep", "trace_points", 801)
    if n_trace < 2:
        raise DomainError(f"trace_points must be >= 2, got {n_trace}")
    tgrid = np.linspace(0.0, w.t_f, n_trace)
    wave_table = np.column_stack([tgrid, gate.waveform_eval(w, tgrid)])
    write_csv(os.path.join(out, "waveform.csv"), ["t", "s"], wave_table)
    traces = gate.gate_level_trace(params, w, n_samples=n_trace)
    for start, table in traces.items():
        write_csv(
            os.path.join(out, f"gate_trace_start{start}.csv"),
            ["t", "E0", "E1", "E2", "E3", "P0", "P1", "P2", "P3"], table)
    c = report.canonical
    items = [
        ("s_min", w.s_min), ("t_ramp", w.t_ramp), ("t_hold", w.t_hold),
        ("t_f", w.t_f), ("fidelity", report.fidelity),
        ("eta", c.eta), ("theta", c.theta), ("nu1", c.nu1),
        ("nu2", c.nu2), ("phi1", c.phi1), ("phi2", c.phi2),
        ("leakage", c.leakage),
        ("virtual_z_control", report.virtual_z[0]),
        ("virtual_z_target", report.virtual_z[1]),
        ("global_phase", report.global_phase),
    ] + list(extra)
    write_report(os.path.join(out, "gate_report.txt"), items)
    if plot:
        from fluxgate import plots
        plots.plot_waveform(wave_table, os.path.join(out, "waveform.png"))
        plots.plot_gate_trace(traces[gate.GATE_ORDER[0]],
                              os.path.join(out, "gate_trace.png"))


def cmd_gate(cfg, out, plot, seed):
    params = cfg.spin_params()
    report = gate.gate_unitary(params, cfg.waveform())
    _emit_gate_outputs(cfg, out, plot, params, report)


def cmd_gate_opt(cfg, out, plot, seed):
    params = cfg.spin_params()
    cfg.require("gate")
    t_f = cfg.get("gate", "t_f")
    restarts = cfg.get("gate", "restarts", 8)
    if t_f is None or t_f <= 0.0:
        raise DomainError(f"gate t_f budget must be positive, got {t_f}")
    _, report = gate.optimize_waveform(params, t_f, seed=seed,
                                       restarts=restarts)
    _emit_gate_outputs(cfg, out, plot, params, report,
                       extra=[("optimizer_seed", seed),
                              ("optimizer_restarts", restarts)])


def cmd_qpt(cfg, out, plot, seed):
    params = cfg.spin_params()
    report = gate.gate_unitary(params, cfg.waveform())
    composed = gate.compose_cnot(report)
    chi = gate.qpt(composed)
    chi_ideal = gate.qpt(gate.CNOT)
    labels = list(gate.PAULI_LABELS)
    header = ["pauli"] + labels
    for name, part in (("qpt_chi_real.csv", chi.real),
                       ("qpt_chi_imag.csv", chi.imag)):
        lines = [",".join(header)]
        for lbl, row in zip(labels, part):
            lines.append(lbl + "," + ",".join(f"{v:.16e}" for v in row))
        _write_text(os.path.join(out, name), "\n".join(lines) + "\n")
    f_pro = gate.process_fidelity(chi_ideal, chi)
    write_report(os.path.join(out, "qpt_report.txt"), [
        ("gate_fidelity", report.fidelity),
        ("cnot_fidelity", gate.fidelity(composed, gate.CNOT)),
        ("process_fidelity", f_pro),
        ("avg_fidelity_from_process", (4.0 * f_pro + 1.0) / 5.0),
    ])
    if plot:
        from fluxgate import plots
        plots.plot_chi(chi, labels, os.path.join(out, "qpt.png"))


def _translation_inputs(cfg):
    params = cfg.spin_params()
    w = cfg.waveform()
    cp = cfg.circuit_params()
    n = cfg.get("circuit", "samples", 200)
    if n < 1:
        raise DomainError(f"circuit samples must be >= 1, got {n}")
    times = np.linspace(0.0, w.t_f, n)
    targets = circuit.ising_targets(params, w, times)
    return params, w, cp, times, targets


def cmd_translate(cfg, out, plot, seed):
    _, _, cp, times, targets = _translation_inputs(cfg)
    fluxes = circuit.invert_schedule(cp, targets)
    table = np.array([[t, f.fx1, f.fx2, f.fz1, f.fz2, f.fc]
                      for t, f in zip(times, fluxes)])
    write_csv(os.path.join(out, "flux_schedule.csv"),
              ["t", "fx1", "fx2", "fz1", "fz2", "fc"], table)
    err = circuit.roundtrip_check(cp, fluxes, targets)
    write_report(os.path.join(out, "translate_report.txt"), [
        ("samples", len(times)),
        ("roundtrip_max_error_ghz", err),
    ])
    if plot:
        from fluxgate import plots
        plots.plot_flux_x(table, os.path.join(out, "flux_x.png"))
        plots.plot_flux_z(table, os.path.join(out, "flux_z.png"))


def cmd_circuit_levels(cfg, out, plot, seed):
    _, _, cp, times, targets = _translation_inputs(cfg)
    fluxes = circuit.invert_schedule(cp, targets)
    levels = circuit.circuit_levels(cp, fluxes)
    table = np.column_stack([times, levels])
    write_csv(os.path.join(out, "circuit_levels.csv"),
              ["t", "E0", "E1", "E2", "E3"], table)
    if plot:
        from fluxgate import plots
        plots.plot_levels(table, os.path.join(out, "circuit_levels.png"),
                          xlabel="time (ns)")


_COMMANDS = {
    "schedule": lambda cfg, out, plot, seed: cmd_schedule(cfg, out, plot),
    "levels": lambda cfg, out, plot, seed: cmd_levels(cfg, out, plot),
    "gaps": lambda cfg, out, plot, seed: cmd_gaps(cfg, out, plot),
    "oscillation": lambda cfg, out, plot, seed: cmd_oscillation(
        cfg, out, plot),
    "gate": cmd_gate,
    "gate-opt": cmd_gate_opt,
    "qpt": cmd_qpt,
    "translate": cmd_translate,
    "circuit-levels": cmd_circuit_levels,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fluxgate",
        description="Two-spin-gadget annealing, gate, and flux-bias "
                    "translation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out", default=None,
                       help="output directory (default from [run] out_dir)")
        p.add_argument("--seed", type=int, default=None,
                       help="optimizer seed (default from [run] seed)")
        p.add_argument("--plot", action="store_true",
                       help="also render matplotlib figures")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = args.out if args.out is not None else cfg.get(
            "run", "out_dir", "out")
        seed = args.seed if args.seed is not None else cfg.get(
            "run", "seed", 0)
        os.makedirs(out, exist_ok=True)
        _COMMANDS[args.command](cfg, out, args.plot, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except circuit.InversionError as exc:
        print(f"translation failed: {exc}", file=sys.stderr)
        return 4
    except (DomainError, ValueError, spin_model.GapRootError,
            dynamics.StepRefinementError, circuit.TruncationError,
            circuit.SwValidityError, circuit.AnchoringError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
