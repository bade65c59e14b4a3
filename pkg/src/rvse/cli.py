"""Command-line front end.

Subcommands ``moments``, ``spectral``, ``autocorr`` and ``eigs`` each write
one CSV with a ``#`` metadata header. Exit codes: 0 success, 1 parse or
config error, 2 numeric guard (dimension, sector, annihilation), 3 I/O.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .autocorr import AutocorrConfig, autocorrelation, to_scaled_time
from .errors import NumericGuardError, ParseError
from .gf import SpectralConfig, ea_ip_table, spectral_function
from .noise import NoiseModel, bernoulli_records, epsilon_sequence, noisy_records
from .output import (
    ConfigError,
    gnuplot_script,
    load_config,
    render_csv,
    sha256_bytes,
    write_text,
)
from .pauli import BUILTIN_PREFIX, OperatorLCU, builtin_text, parse_hamiltonian
from .rvse import rescale_records, run_rvse
from .statevec import (
    exact_diagonalize,
    is_number_conserving,
    parse_state,
    scale_hamiltonian,
    sector_basis,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("moments", "spectral", "autocorr", "eigs")


class Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:count`` into an inclusive linspace."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid {text!r} is not start:stop:count")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"grid {text!r}: {exc}") from None
    if n < 1 or (n > 1 and not b > a):
        raise ConfigError(f"grid {text!r} must have count >= 1 and stop > start")
    return np.linspace(a, b, n)


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hamiltonian", required=True, help=f"Pauli-sum file, or {BUILTIN_PREFIX}NAME")
    p.add_argument("--scale", choices=("spectral", "l1", "auto"), default="auto")
    p.add_argument("--emin", type=float)
    p.add_argument("--emax", type=float)
    p.add_argument("--margin", type=float, default=0.01)
    p.add_argument("--terms", type=int, help="truncation order K")
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", choices=("exact", "surrogate", "bernoulli"), default="exact")
    p.add_argument("--phi-convention", choices=("paper", "sqrt"), default="paper")
    p.add_argument("--coupling", choices=("same", "independent"), default="same")
    p.add_argument("--workers", type=int, help="threads for grid evaluation (default: all cores)")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--gnuplot", action="store_true", help="also write OUT.gp next to the CSV")
    p.add_argument("--config", help="key = value file; command-line flags take precedence")


def build_parser() -> Parser:
    parser = Parser(prog="rvse", description="Chebyshev-moment spectral functions and autocorrelations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("moments", help="normalizing constants, overlaps and moments")
    _shared(p)
    p.add_argument("--state", required=True, help="e.g. '|0101>' or '0.6|01> + 0.8|10>'")
    p.add_argument("--noise-report", help="write the per-order noise table here")

    p = sub.add_parser("spectral", help="diagonal spectral function A_ii(E)")
    _shared(p)
    p.add_argument("--orbital", type=int, default=0)
    p.add_argument("--sector", type=int, required=True, help="particle number N of the ground state")
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--grid", required=True, help="start:stop:count in energy units")

    p = sub.add_parser("autocorr", help="autocorrelation C(t)")
    _shared(p)
    p.add_argument("--state", required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--steps", type=int, default=201)
    p.add_argument("--auto-k", action="store_true", help="choose K from the truncation bound")
    p.add_argument("--eps", type=float, default=1e-8, help="error budget for --auto-k")
    p.add_argument("--physical-time", action="store_true", help="t in units of the unscaled Hamiltonian")
    p.add_argument("--noise-report")

    p = sub.add_parser("eigs", help="exact spectrum and, with --sector, the EA/IP table")
    _shared(p)
    p.add_argument("--sector", type=int)
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _join_negative_values(argv: list[str]) -> list[str]:
    """Turn ``--flag -2:2:41`` into ``--flag=-2:2:41`` so argparse keeps the value."""
    out: list[str] = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if arg.startswith("--") and "=" not in arg and len(nxt) > 1 and nxt[0] == "-" and nxt[1] in "0123456789.(|":
            out.append(f"{arg}={nxt}")
            i += 2
            continue
        out.append(arg)
        i += 1
    return out


def _config_path(argv: Sequence[str]) -> str | None:
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def _apply_config(parser: Parser, argv: list[str], path: str) -> list[str]:
    """Install config values as subcommand defaults; returns the argv to parse."""
    try:
        values = load_config(path)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    command = values.pop("command", None)
    if not any(a in COMMANDS for a in argv):
        if command is None:
            raise ConfigError("no subcommand on the command line or in the config")
        argv = [command] + argv
    command = next(a for a in argv if a in COMMANDS)
    sp = _subparser(parser, command)
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in values.items():
        if key not in actions:
            raise ConfigError(f"config key {key!r} is not an option of {command!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = _bool(raw)
            continue
        try:
            value = action.type(raw) if action.type else raw
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
        defaults[key] = value
    sp.set_defaults(**defaults)
    for action in sp._actions:
        if action.dest in defaults:
            action.required = False
    return argv


@dataclass
class Loaded:
    op: OperatorLCU
    source: str
    sha256: str


def load_input(source: str) -> Loaded:
    if source.startswith(BUILTIN_PREFIX):
        text = builtin_text(source[len(BUILTIN_PREFIX) :])
    else:
        text = Path(source).read_text(encoding="utf-8")
    return Loaded(parse_hamiltonian(text), source, sha256_bytes(text.encode("utf-8")))


def _check_paths(args) -> None:
    if not args.hamiltonian.startswith(BUILTIN_PREFIX) and not Path(args.hamiltonian).is_file():
        raise FileNotFoundError(f"Hamiltonian file not found: {args.hamiltonian}")
    for attr in ("out", "noise_report"):
        target = getattr(args, attr, None)
        if target and not Path(target).resolve().parent.is_dir():
            raise FileNotFoundError(f"output directory does not exist for {target}")
    if args.gnuplot and not args.out:
        raise ConfigError("--gnuplot needs --out")


def _params(args) -> dict[str, object]:
    skip = {"config", "out", "noise_report", "gnuplot"}
    out = {"command": args.command}
    out.update({k: v for k, v in vars(args).items() if k not in skip and k != "command"})
    return out


def _model(args) -> NoiseModel:
    return NoiseModel(
        shots=args.shots, seed=args.seed, mode=args.noise, phi_convention=args.phi_convention, coupling=args.coupling
    )


def _provenance(loaded: Loaded, extra: dict[str, object]) -> dict[str, object]:
    prov = {"version": __version__, "hamiltonian_sha256": loaded.sha256, "n_qubits": loaded.op.n_qubits}
    prov.update(extra)
    return prov


def _noisy(h_sc, psi, records, model: NoiseModel, K: int):
    """Noisy records and, in surrogate mode, the eps sequence behind them."""
    if model.mode == "surrogate":
        seq = epsilon_sequence([r.norm for r in records], h_sc.sum_sq(), model.shots, coupling=model.coupling)
        return noisy_records(records, model, h_sc.sum_sq(), model.rng(), seq), seq
    if model.mode == "bernoulli":
        return bernoulli_records(h_sc, psi, K, model, model.rng()), None
    return None, None


def _noise_report(records, noisy, eps_seq, params, prov) -> str:
    cols = ["k", "norm_exact", "eps", "norm_noisy", "sigma_mu", "sigma_nu"]
    rows = []
    for i, r in enumerate(records):
        sm = eps_seq.sigma_mu[i] if eps_seq is not None else float("nan")
        sn = eps_seq.sigma_nu[i] if eps_seq is not None else float("nan")
        rows.append([r.k, r.norm, noisy[i].eps, noisy[i].norm_noisy, sm, sn])
    return render_csv(cols, rows, params, prov)


def run_moments(args, loaded: Loaded) -> tuple[str, list[str], str, list[str]]:
    op = loaded.op
    h_sc, scaling = scale_hamiltonian(op, args.scale, args.emin, args.emax, args.margin)
    psi = parse_state(args.state, op.n_qubits)
    K = 50 if args.terms is None else args.terms
    nrm = psi.norm()
    records = rescale_records(run_rvse(h_sc, psi, K), nrm)
    model = _model(args)
    prov = _provenance(loaded, {**scaling.as_metadata(), "terms_used": K})
    params = _params(args)
    cols = ["k", "norm", "overlap_re", "overlap_im", "moment"]
    noisy, eps_seq = _noisy(h_sc, psi, records, model, K)
    rows = []
    for i, r in enumerate(records):
        row = [r.k, r.norm, r.overlap.real, r.overlap.imag, r.norm * r.overlap.real]
        if noisy is not None:
            n = noisy[i]
            row += [n.norm_noisy, n.eps, n.overlap_noisy.real, n.overlap_noisy.imag, n.norm_noisy * n.overlap_noisy.real]
        rows.append(row)
    if noisy is not None:
        cols += ["norm_noisy", "eps", "overlap_noisy_re", "overlap_noisy_im", "moment_noisy"]
        if args.noise_report:
            write_text(_noise_report(records, noisy, eps_seq, params, prov), args.noise_report)
    text = render_csv(cols, rows, params, prov)
    return text, cols, "k", ["moment"]


def run_spectral(args, loaded: Loaded):
    K = 2000 if args.terms is None else args.terms
    config = SpectralConfig(
        orbital=args.orbital,
        eta=args.eta,
        K=K,
        grid=parse_grid(args.grid),
        n_particles=args.sector,
        scale=args.scale,
        e_min=args.emin,
        e_max=args.emax,
        margin=args.margin,
        workers=args.workers,
    )
    res = spectral_function(loaded.op, config, _model(args))
    cols = ["E", "E_scaled", "A", "A_attach", "A_remove", "A_exact", "Delta"]
    rows = zip(
        res.grid, res.grid_scaled, res.a_values, res.a_attach, res.a_remove, res.exact_reference, res.delta_values
    )
    prov = _provenance(
        loaded, {**res.scaling.as_metadata(), "terms_used": K, "ground_energy": res.ground_energy}
    )
    comments = ["EA/IP table: label index value; peaks sit at minus the value"]
    comments += [f"table {line.label} {line.index} {line.energy!r}" for line in res.table]
    text = render_csv(cols, rows, _params(args), prov, comments)
    return text, cols, "E", ["A", "A_exact"]


def run_autocorr(args, loaded: Loaded):
    op = loaded.op
    h_sc, scaling = scale_hamiltonian(op, args.scale, args.emin, args.emax, args.margin)
    psi = parse_state(args.state, op.n_qubits)
    t = np.linspace(0.0, args.tmax, args.steps)
    phase = np.ones(t.size, dtype=complex)
    t_sc = t
    if args.physical_time:
        t_sc, phase = to_scaled_time(scaling, t)
    K = None if (args.auto_k or args.terms is None) else args.terms
    config = AutocorrConfig(t_sc, K=K, epsilon_target=args.eps, workers=args.workers)
    model = _model(args)
    res = autocorrelation(h_sc, psi, config, model)
    approx = phase * res.c_approx
    exact = phase * res.c_exact
    cols = ["t", "re_approx", "im_approx", "re_exact", "im_exact", "abs_err", "bound", "delta"]
    rows = [
        [t[i], approx[i].real, approx[i].imag, exact[i].real, exact[i].imag, abs(approx[i] - exact[i]), res.bound[i], res.delta[i]]
        for i in range(t.size)
    ]
    params = _params(args)
    prov = _provenance(loaded, {**scaling.as_metadata(), "terms_used": res.K})
    if args.noise_report and model.active:
        nrm = psi.norm()
        records = rescale_records(run_rvse(h_sc, psi, res.K), nrm)
        noisy, eps_seq = _noisy(h_sc, psi, records, model, res.K)
        write_text(_noise_report(records, noisy, eps_seq, params, prov), args.noise_report)
    return render_csv(cols, rows, params, prov), cols, "t", ["re_approx", "re_exact"]


def run_eigs(args, loaded: Loaded):
    op = loaded.op
    decomp = exact_diagonalize(op)
    _, scaling = scale_hamiltonian(op, args.scale, args.emin, args.emax, args.margin, decomp)
    cols = ["index", "energy", "energy_scaled", "n_particles"]
    comments = []
    if args.sector is None:
        energies = decomp.eigenvalues
        nums = decomp.number_expectations()
    else:
        energies, _ = sector_basis(decomp, args.sector)
        nums = np.full(energies.size, float(args.sector))
        if is_number_conserving(op):
            comments = ["EA/IP table: label index value; peaks sit at minus the value"]
            comments += [f"table {line.label} {line.index} {line.energy!r}" for line in ea_ip_table(op, args.sector)]
    rows = [[i, e, scaling.map_energy(e), n] for i, (e, n) in enumerate(zip(energies, nums))]
    prov = _provenance(loaded, scaling.as_metadata())
    return render_csv(cols, rows, _params(args), prov, comments), cols, "index", ["energy"]


RUNNERS = {"moments": run_moments, "spectral": run_spectral, "autocorr": run_autocorr, "eigs": run_eigs}


def main(argv: Sequence[str] | None = None) -> int:
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        cfg = _config_path(argv)
        if cfg is not None:
            argv = _apply_config(parser, argv, cfg)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
        _check_paths(args)
        loaded = load_input(args.hamiltonian)
        text, cols, x, ys = RUNNERS[args.command](args, loaded)
        write_text(text, args.out)
        if args.gnuplot:
            script = gnuplot_script(Path(args.out).name, cols, x, ys, title=args.command)
            write_text(script, str(args.out) + ".gp")
    except NumericGuardError as exc:
        print(f"rvse: numeric guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, ValueError) as exc:
        print(f"rvse: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rvse: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
