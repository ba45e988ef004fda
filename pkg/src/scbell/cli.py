"""``scbell`` command-line interface.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 validation
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from scbell.bcs import MATERIALS, SUPERCONDUCTORS
from scbell.config import Source, apply_override, build_config, load_file, load_recipe, merge, recipe_names
from scbell.errors import ConfigurationError, OracleConvergenceError
from scbell.oracle import OracleConfig
from scbell.sweeps import Table, run_convert_bell, run_map, run_spectrum
from scbell.validation import EXPECTED_PAIR_SCALE, validate

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return "%.9g" % value


def render_csv(table: Table) -> str:
    lines = [",".join(table.columns)]
    lines += [",".join(_format_value(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def _json_value(value):
    if isinstance(value, float):
        return float("%.9g" % value) if math.isfinite(value) else None
    return value


def render_json(table: Table) -> str:
    doc = {
        "columns": list(table.columns),
        "rows": [[_json_value(v) for v in row] for row in table.rows],
        "meta": {k: _json_value(v) for k, v in table.meta.items()},
    }
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigurationError(f"output.path: cannot write {path} ({exc.strerror})") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--recipe", help=f"shipped configuration ({', '.join(recipe_names())})")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="output encoding")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--preset-sc", help="superconductor preset")
    common.add_argument("--preset-mat", help="semiconductor preset")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry, e.g. grid.x.range=[0,2,5]"
    )
    common.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")

    parser = _Parser(prog="scbell", description="Rates and detection purity of a superconducting Bell-state analyser.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("dp-map", parents=[common], help="detection purity on a 2D grid")
    sub.add_parser("spectrum", parents=[common], help="broadened one-photon and two-photon spectra")
    sub.add_parser("bandwidth-map", parents=[common], help="detection purity with finite photon bandwidth")
    sub.add_parser("convert-bell", parents=[common], help="Bell-state conversion table of the wave-plate chain")
    sub.add_parser("validate", parents=[common], help="closed-form rates against the k-space oracle")
    sub.add_parser("materials", help="list the built-in presets")
    return parser


def resolve_config(args):
    """Recipe, then config file, then flags; later sources win."""
    data, source = {}, Source()
    if args.recipe:
        data, source = load_recipe(args.recipe)
    if args.config:
        extra, file_source = load_file(args.config)
        data, source = merge(data, extra), file_source
    overrides = list(args.set)
    if args.preset_sc:
        overrides.append(f"superconductor.preset={args.preset_sc}")
    if args.preset_mat:
        overrides.append(f"material.preset={args.preset_mat}")
    if args.out:
        overrides.append(f"output.path={json.dumps(args.out)}")
    if args.format:
        overrides.append(f"output.format={args.format}")
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    for assignment in overrides:
        data = apply_override(data, assignment, source)
    return build_config(args.command, data, source)


def _materials_text() -> str:
    lines = ["superconductors:"]
    for name, sc in SUPERCONDUCTORS.items():
        lines.append(f"  {name}: delta0 = {sc.delta0:g} meV, Tc = {sc.Tc:g} K")
    lines.append("semiconductors:")
    for name, mat in MATERIALS.items():
        lines.append(
            f"  {name}: E_g = {mat.E_g:g} meV, m_n = {mat.m_n:g}, m_LH = {mat.m_p_LH:g}, m_HH = {mat.m_p_HH:g},"
            f" dw_p = {mat.dw_p:g} meV, mu_n = {mat.mu_n:g} meV, mu_p = {mat.mu_p:g} meV"
        )
    return "\n".join(lines) + "\n"


def _run_validate(cfg) -> int:
    o = cfg.oracle
    oracle_cfg = OracleConfig(n_k=int(o["n_k"]), k_max=float(o["k_max"]), eta=o["eta"], profile=o["profile"])
    report = validate(
        cfg.material,
        cfg.superconductor,
        o["temperatures_over_tc"],
        o["one_photon_detunings"],
        o["two_photon_detunings"],
        oracle_cfg,
        float(o["tolerance"]),
        cfg.B2,
    )
    rows = [
        (c.quantity, c.t_over_tc, c.detuning_over_gap, c.closed, c.oracle, report.error(c), c.oracle_change)
        for c in report.checks
    ]
    table = Table(
        ("quantity", "t_over_tc (1)", "detuning_over_gap (1)", "closed (a.u.)", "oracle (a.u.)", "rel_error (1)", "oracle_change (1)"),
        rows,
        {"command": "validate", "pair_scale": report.pair_scale, "expected_pair_scale": EXPECTED_PAIR_SCALE},
    )
    _emit(render_json(table) if cfg.fmt == "json" else render_csv(table), cfg.out)
    status = "PASS" if report.passed else "FAIL"
    print(
        f"validate: {status} {len(report.checks) - len(report.failures)}/{len(report.checks)} within"
        f" {report.tolerance:g}; fitted pair-rate constant closed/oracle = {report.pair_scale:.6f}",
        file=sys.stderr,
    )
    return EXIT_OK if report.passed else EXIT_VALIDATION


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.command == "materials":
        sys.stdout.write(_materials_text())
        return EXIT_OK
    try:
        if args.jobs is not None and args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        cfg = resolve_config(args)
        if args.dump_config:
            sys.stdout.write(cfg.dump())
            return EXIT_OK
        if args.command == "validate":
            return _run_validate(cfg)
        if args.command in ("dp-map", "bandwidth-map"):
            table = run_map(cfg)
        elif args.command == "spectrum":
            table = run_spectrum(cfg)
        else:
            table = run_convert_bell(cfg)
        _emit(render_json(table) if cfg.fmt == "json" else render_csv(table), cfg.out)
    except UsageError as exc:
        print(f"scbell: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"scbell: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleConvergenceError as exc:
        print(f"scbell: oracle did not converge: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
