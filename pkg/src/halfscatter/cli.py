"""Command-line entry point.

Every subcommand reads the model from ``--config`` (see
:mod:`halfscatter.config`) unless ``--potential`` / ``--theta`` override it.
Results go to stdout, or to ``<out>/<command>.<ext>`` when ``--out`` is set.

Exit codes: 0 success, 1 validation failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .errors import HalfScatterError
from .expansions import eigenvalue_expansion, m_extended, threshold_expansion
from .fiber import ModelSpec, band_structure, is_threshold, model_data
from .resolvent import boundary_sandwich, full_sandwiched_resolvent, m_matrix, sandwiched_resolvent
from .serialize import dumps, rows_to_csv, to_jsonable
from .smatrix import embedded_limit, onshell_smatrix, smatrix_scan, threshold_limit
from .spectrum import point_spectrum, surface_dispersion
from .validation import run_validation_suite
from .waveop import RescaledGrid, degeneracy_report, wave_operator, wave_operator_scan

log = logging.getLogger("halfscatter")

TABULAR = {"bands", "spectrum", "dispersion", "smatrix-scan", "waveop", "waveop-scan"}


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"cannot parse number list {text!r}") from exc


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise UsageError(f"cannot parse complex number {text!r}") from exc


def _model(args, config) -> ModelSpec:
    potential = _floats(args.potential) if args.potential else config.potential
    theta = args.theta if args.theta is not None else config.theta
    return ModelSpec(potential, theta)


def _grid(args, config) -> RescaledGrid:
    points = args.grid if getattr(args, "grid", None) else config.grid_points
    return RescaledGrid(points, config.grid_smax)


def _theta_grid(count: int) -> np.ndarray:
    if count < 1:
        raise UsageError("--theta-grid must be positive")
    return np.linspace(0.0, 2.0 * np.pi, count)


# ---------------------------------------------------------------------------
# commands; each returns (payload, csv_rows or None)


def cmd_bands(args, config):
    model = _model(args, config)
    bs = band_structure(model)
    rows = [("channel", "lambda", "lower", "upper")]
    rows += [(j + 1, 0.5 * (lo + hi), lo, hi) for j, (lo, hi) in enumerate(bs.bands)]
    payload = {"model": _describe(model), "bands": bs.bands, "thresholds": bs.thresholds, "spectrum": bs.spectrum, "degenerate_pairs": bs.degenerate_pairs}
    return payload, rows


def cmd_spectrum(args, config):
    model = _model(args, config)
    spec = point_spectrum(model)
    rows = [("energy", "multiplicity", "location")] + list(spec.entries)
    return {"model": _describe(model), "eigenvalues": spec.entries, "metadata": spec.metadata}, rows


def cmd_dispersion(args, config):
    model = _model(args, config)
    result = surface_dispersion(model.potential, _theta_grid(args.theta_grid))
    return {"potential": model.potential, "rows": result.rows, "warnings": result.warnings}, result.as_table()


def cmd_resolvent(args, config):
    model = _model(args, config)
    z = _complex(args.z)
    if z.imag == 0.0:
        free = boundary_sandwich(z.real, model)
    else:
        free = sandwiched_resolvent(z, model)
    payload = {"model": _describe(model), "z": z, "free_sandwich": free}
    if args.perturbed:
        payload["perturbed_sandwich"] = full_sandwiched_resolvent(z if z.imag else z.real, model)
        payload["m_matrix"] = m_matrix(z if z.imag else z.real, model)
    return payload, None


def cmd_expand(args, config):
    model = _model(args, config)
    energy = args.energy
    if is_threshold(energy, model_data(model).eig):
        exp = threshold_expansion(energy, model)
        payload = {
            "kind": "threshold",
            "energy": energy,
            "edge_channels": exp.edge_channels,
            "ranks": exp.ranks,
            "I0_0": exp.I0_0,
            "M1_0": exp.M1_0,
            "S0": exp.S0,
            "S1": exp.S1,
            "S2": exp.S2,
            "Cprime": exp.Cprime,
            "flags": exp.flags,
        }
    else:
        exp = eigenvalue_expansion(energy, model)
        payload = {"kind": "regular" if exp.regular else "eigenvalue", "energy": energy, "T0": exp.T0, "S": exp.S, "J1_0": exp.J1_0}
    if args.kappa is not None:
        kappa = _complex(args.kappa)
        payload["kappa"] = kappa
        payload["m_extended"] = m_extended(energy, kappa, model)
    payload["model"] = _describe(model)
    return payload, None


def cmd_smatrix(args, config):
    model = _model(args, config)
    energy = args.energy
    if is_threshold(energy, model_data(model).eig):
        rep = threshold_limit(energy, model)
        payload = {"kind": "threshold", "channels": rep.channels, "coefficients": rep.coefficients, "classification": rep.classification, "undefined_pairs": rep.undefined_pairs}
    else:
        try:
            s = onshell_smatrix(energy, model)
            payload = {"kind": "regular", "open_channels": s.open_channels, "matrix": s.assembled, "unitarity_defect": s.unitarity_defect()}
        except HalfScatterError:
            lim = embedded_limit(energy, model)
            payload = {"kind": "embedded-eigenvalue", "open_channels": lim.open_channels, "matrix": lim.assembled}
    payload["energy"] = energy
    payload["model"] = _describe(model)
    return payload, None


def cmd_smatrix_scan(args, config):
    model = _model(args, config)
    lo, hi = model_data(model).eig.spectrum
    energies = np.linspace(lo, hi, args.points)
    scan = smatrix_scan(model, energies)
    rows = [("energy", "open_channels", "unitarity_defect", "matrix")]
    rows += [(s.energy, s.open_channels, s.unitarity_defect(), s.assembled.ravel()) for s in scan]
    payload = {"model": _describe(model), "entries": [{"energy": s.energy, "open_channels": s.open_channels, "matrix": s.assembled, "unitarity_defect": s.unitarity_defect()} for s in scan]}
    return payload, rows


def cmd_threshold_limits(args, config):
    model = _model(args, config)
    out = []
    for energy in model_data(model).eig.thresholds:
        rep = threshold_limit(float(energy), model)
        out.append({"energy": float(energy), "channels": rep.channels, "coefficients": rep.coefficients, "classification": rep.classification})
    return {"model": _describe(model), "thresholds": out}, None


def cmd_waveop(args, config):
    model = _model(args, config)
    wd = wave_operator(model, _grid(args, config))
    rows = [("part", "k", "sigma")]
    spectra = {}
    for part in ("leading", "compact", "remainder", "assembled"):
        sv = wd.singular_values(part)
        spectra[part] = sv
        rows += [(part, k + 1, float(s)) for k, s in enumerate(sv)]
    payload = {"model": _describe(model), "grid": {"points": wd.grid.points, "smax": wd.grid.smax}, "singular_values": spectra, "degeneracy": wd.degeneracy.as_dict()}
    return payload, rows


def cmd_waveop_scan(args, config):
    model = _model(args, config)
    entries = wave_operator_scan(model.potential, _theta_grid(args.theta_grid), _grid(args, config))
    keys = list(entries[0]) if entries else []
    rows = [tuple(keys)] + [tuple(e[k] for k in keys) for e in entries]
    return {"potential": model.potential, "entries": entries}, rows


def cmd_degeneracy(args, config):
    model = _model(args, config)
    return {"model": _describe(model), "report": degeneracy_report(model).as_dict()}, None


def _describe(model: ModelSpec) -> dict:
    return {"potential": list(model.potential), "theta": model.theta}


COMMANDS = {
    "bands": cmd_bands,
    "spectrum": cmd_spectrum,
    "dispersion": cmd_dispersion,
    "resolvent": cmd_resolvent,
    "expand": cmd_expand,
    "smatrix": cmd_smatrix,
    "smatrix-scan": cmd_smatrix_scan,
    "threshold-limits": cmd_threshold_limits,
    "waveop": cmd_waveop,
    "waveop-scan": cmd_waveop_scan,
    "degeneracy": cmd_degeneracy,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", help="directory for output files (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--potential", help="comma-separated boundary potential, overrides the config")
    common.add_argument("--theta", type=float, help="quasi-momentum in [0, 2 pi], overrides the config")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="halfscatter", description="Scattering on the discrete half-space with a periodic boundary potential.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bands", parents=[common], help="bands and thresholds of one fiber")
    sub.add_parser("spectrum", parents=[common], help="eigenvalues of one fiber")
    p = sub.add_parser("dispersion", parents=[common], help="eigenvalue branches over theta")
    p.add_argument("--theta-grid", type=int, default=64)
    p = sub.add_parser("resolvent", parents=[common], help="sandwiched resolvent at z")
    p.add_argument("-z", required=True, help="spectral parameter, e.g. 0.5+0.1j; real means +i0")
    p.add_argument("--perturbed", action="store_true", help="also the perturbed resolvent and M(z)")
    p = sub.add_parser("expand", parents=[common], help="expansion data at an energy")
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--kappa", help="also evaluate the continued M at this kappa")
    p = sub.add_parser("smatrix", parents=[common], help="scattering matrix (or its limit) at an energy")
    p.add_argument("--energy", type=float, required=True)
    p = sub.add_parser("smatrix-scan", parents=[common], help="scattering matrices across the spectrum")
    p.add_argument("--points", type=int, default=200)
    sub.add_parser("threshold-limits", parents=[common], help="S-matrix limits at every threshold")
    p = sub.add_parser("waveop", parents=[common], help="singular values of the discretized wave operator parts")
    p.add_argument("--grid", type=int, help="odd number of nodes per channel")
    p = sub.add_parser("waveop-scan", parents=[common], help="wave-operator summaries over theta")
    p.add_argument("--theta-grid", type=int, default=8)
    p.add_argument("--grid", type=int, help="odd number of nodes per channel")
    sub.add_parser("degeneracy", parents=[common], help="exceptional-case classification")
    p = sub.add_parser("validate", parents=[common], help="run the acceptance suite")
    p.add_argument("--suite", help="comma-separated criterion numbers (default: config)")
    p.add_argument("--workers", type=int, default=1)
    return parser


def _emit(text: str, args, name: str, ext: str):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{name}.{ext}"
        path.write_text(text)
        print(str(path))
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _run_validate(args, config) -> int:
    if args.suite:
        try:
            suite = tuple(int(x) for x in args.suite.split(",") if x.strip())
        except ValueError as exc:
            raise UsageError(f"cannot parse --suite {args.suite!r}") from exc
        config = config.with_overrides(suite=suite)
    if args.potential or args.theta is not None:
        model = _model(args, config)
        config = config.with_overrides(potential=model.potential, theta=model.theta)
    report = run_validation_suite(config, workers=args.workers)
    for line in report["summary"]:
        print(line, file=sys.stderr)
    if args.format == "csv":
        rows = [("criterion", "name", "passed", "runtime_s")]
        rows += [(c["number"], c["name"], c["passed"], c["runtime"]) for c in report["criteria"]]
        _emit(rows_to_csv(rows), args, "validate", "csv")
    else:
        _emit(dumps(report), args, "validate", "json")
    return 0 if report["passed"] else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.command == "validate":
            return _run_validate(args, config)
        if args.format == "csv" and args.command not in TABULAR:
            raise UsageError(f"{args.command} has no CSV form; use --format json")
        payload, rows = COMMANDS[args.command](args, config)
        name = args.command.replace("-", "_")
        if args.format == "csv":
            _emit(rows_to_csv(rows), args, name, "csv")
            if args.command == "waveop" and args.out:
                _emit(dumps(payload["degeneracy"]), args, "degeneracy", "json")
        else:
            _emit(dumps(to_jsonable(payload)), args, name, "json")
    except (UsageError, HalfScatterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
