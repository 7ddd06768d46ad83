"""Command-line front end.

    diapol levels   --config job.cfg [--state X --vmax 3]
    diapol ddp      --config job.cfg
    diapol fit-eff  --config job.cfg [--ddp out/ddp.csv]
    diapol tuneout  --config job.cfg [--model out/effective.json]
    diapol magic    --config job.cfg [--feshbach atom-pair|last-bound-level|both]
    diapol oracle   [--E2-cm 10000 --omega-cm 6000 ...]

Configuration files hold ``key = value`` lines; relative paths are taken
relative to the file. Command-line flags override file values. Exit codes:
0 success, 1 numerical failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, units
from .analysis import AnalysisError, find_magic, find_tuneout, resonance_windows
from .angular import rotational_weights
from .curves import CurveError, DipoleFunction, DomainError, load_curve, load_dipole, load_spin_orbit
from .models import (
    EffectiveModel,
    FitError,
    OracleError,
    TwoLevel,
    effective_spectrum,
    fit_effective,
    in_windows,
    tuneout_closed_form,
    twolevel_alpha,
    twolevel_oracle,
)
from .response import (
    CONVENTIONS,
    CoreModel,
    DataError,
    ResponseSpectrum,
    TransitionTable,
    alpha_sum,
    atom_alpha,
    build_transition_table,
    core_alpha,
    core_model,
    empty_table,
    load_atomic_lines,
    scan,
)
from .solver import (
    DEFAULT_BETA,
    GridConfig,
    GridError,
    LevelBasis,
    SolverError,
    build_grid,
    solve_coupled,
    solve_single,
)

log = logging.getLogger("diapol")

CSV_FMT = "%.8e"
CHUNK = 50_000
DDP_COLUMNS = (
    "omega_cm-1", "re_alpha_iso", "im_alpha_iso", "re_alpha_par", "re_alpha_perp",
    "re_gamma_aniso", "re_alpha_gr", "re_alpha_exc", "re_alpha_JM",
)
FESHBACH_SOURCES = ("atom-pair", "last-bound-level", "both")


class ConfigError(ValueError):
    pass


INPUT_ERRORS = (ConfigError, CurveError, DataError, GridError, FileNotFoundError, units.UnitError)
NUMERIC_ERRORS = (SolverError, FitError, OracleError, AnalysisError, DomainError, ArithmeticError,
                  np.linalg.LinAlgError)


# ---------------------------------------------------------------------------
# configuration

_PATH_LISTS = ("curves", "dipoles", "spin_orbit", "atom_lines")
_KEYS = _PATH_LISTS + (
    "effective_model", "molecule", "mass_amu", "mass_me", "core", "ground", "scan_lo", "scan_hi",
    "step", "lifetime_ns", "convention", "J", "M", "v", "R_max", "beta", "N", "windows",
    "feshbach", "output",
)


@dataclass
class JobConfig:
    molecule: str = ""
    reduced_mass: float | None = None  # electron masses
    curves: tuple[Path, ...] = ()
    dipoles: tuple[Path, ...] = ()
    spin_orbit: tuple[Path, ...] = ()
    atom_lines: tuple[Path, ...] = ()
    effective_model: Path | None = None
    core: tuple[str, ...] = ()
    ground: str | None = None
    scan: tuple[float, float, float] = (0.0, 20000.0, 0.02)
    lifetime_ns: float = 10.0
    convention: str = "constant-sign"
    J: int = 0
    M: int = 0
    v: int = 0
    R_max: float | None = None
    beta: float = DEFAULT_BETA
    N: int | None = None
    windows: tuple[tuple[float, float], ...] = ()
    feshbach: str = "atom-pair"
    output: Path = Path("out")
    raw: dict = field(default_factory=dict)

    def validate(self) -> None:
        lo, hi, step = self.scan
        if not step > 0:
            raise ConfigError(f"scan step must be positive, got {step}")
        if not lo < hi:
            raise ConfigError(f"scan range needs lo < hi, got {lo} .. {hi}")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"convention must be one of {CONVENTIONS}")
        if self.lifetime_ns <= 0:
            raise ConfigError("lifetime_ns must be positive")
        if self.J < 0 or abs(self.M) > self.J:
            raise ConfigError(f"need J >= 0 and |M| <= J, got J={self.J} M={self.M}")
        if self.feshbach not in FESHBACH_SOURCES:
            raise ConfigError(f"feshbach must be one of {FESHBACH_SOURCES}")
        paths = [*self.curves, *self.dipoles, *self.spin_orbit, *self.atom_lines]
        if self.effective_model is not None:
            paths.append(self.effective_model)
        for p in paths:
            if not p.is_file():
                raise ConfigError(f"no such file: {p}")
        if self.curves and self.reduced_mass is None:
            raise ConfigError("curves given but no mass_amu or mass_me")

    def digest(self) -> str:
        """Hash of the settings and the contents of every input file."""
        h = hashlib.sha256()
        for key in sorted(self.raw):
            if key == "output":
                continue
            h.update(f"{key}={self.raw[key]}\n".encode())
        for p in [*self.curves, *self.dipoles, *self.spin_orbit, *self.atom_lines,
                  *([self.effective_model] if self.effective_model else [])]:
            h.update(p.name.encode())
            h.update(p.read_bytes())
        return "sha256:" + h.hexdigest()[:16]


def read_config(path) -> dict[str, tuple[str, Path]]:
    """Parse a key = value file into {key: (value, base directory)}."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value' with a known key")
        out[key] = (value.strip(), path.parent)
    return out


def _float(raw, key, default=None):
    if key not in raw:
        return default
    try:
        return float(raw[key][0])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw[key][0]!r}") from None


def _int(raw, key, default=None):
    value = _float(raw, key)
    if value is None:
        return default
    if value != int(value):
        raise ConfigError(f"{key}: not an integer: {raw[key][0]!r}")
    return int(value)


def _windows(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for span in text.split():
        lo, sep, hi = span.partition(":")
        try:
            out.append((float(lo), float(hi)))
        except ValueError:
            raise ConfigError(f"windows: expected lo:hi, got {span!r}") from None
        if not sep or not out[-1][0] < out[-1][1]:
            raise ConfigError(f"windows: expected lo:hi with lo < hi, got {span!r}")
    return tuple(out)


def job_from_raw(raw: dict[str, tuple[str, Path]]) -> JobConfig:
    paths = lambda key: tuple(raw[key][1] / p for p in raw[key][0].split()) if key in raw else ()
    words = lambda key: tuple(raw[key][0].split()) if key in raw else ()
    if "mass_amu" in raw and "mass_me" in raw:
        raise ConfigError("give mass_amu or mass_me, not both")
    mass = _float(raw, "mass_me")
    if "mass_amu" in raw:
        mass = units.amu_to_me(_float(raw, "mass_amu"))
    values = {k: v for k, (v, _) in raw.items()}
    job = JobConfig(
        molecule=values.get("molecule", ""),
        reduced_mass=mass,
        curves=paths("curves"),
        dipoles=paths("dipoles"),
        spin_orbit=paths("spin_orbit"),
        atom_lines=paths("atom_lines"),
        effective_model=paths("effective_model")[0] if "effective_model" in raw else None,
        core=words("core"),
        ground=values.get("ground"),
        scan=(_float(raw, "scan_lo", 0.0), _float(raw, "scan_hi", 20000.0), _float(raw, "step", 0.02)),
        lifetime_ns=_float(raw, "lifetime_ns", 10.0),
        convention=values.get("convention", "constant-sign"),
        J=_int(raw, "J", 0),
        M=_int(raw, "M", 0),
        v=_int(raw, "v", 0),
        R_max=_float(raw, "R_max"),
        beta=_float(raw, "beta", DEFAULT_BETA),
        N=_int(raw, "N"),
        windows=_windows(values.get("windows", "")),
        feshbach=values.get("feshbach", "atom-pair"),
        output=paths("output")[0] if "output" in raw else Path("out"),
        raw=values,
    )
    try:
        core_model(*job.core)
    except KeyError as exc:
        raise ConfigError(f"core: unknown ion {exc}") from None
    job.validate()
    return job


_FLAG_KEYS = {
    "output": "output", "mass_amu": "mass_amu", "lifetime_ns": "lifetime_ns",
    "convention": "convention", "J": "J", "M": "M", "v": "v", "ground": "ground",
    "R_max": "R_max", "beta": "beta", "N": "N", "model": "effective_model",
}


def job_from_args(args) -> JobConfig:
    raw = read_config(args.config) if args.config else {}
    cwd = Path.cwd()
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep or key.strip() not in _KEYS:
            raise ConfigError(f"--set expects KEY=VALUE with a known key, got {item!r}")
        raw[key.strip()] = (value.strip(), cwd)
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            raw[key] = (str(value), cwd)
            if key == "mass_amu":
                raw.pop("mass_me", None)
    if getattr(args, "core", None):
        raw["core"] = (" ".join(args.core), cwd)
    if getattr(args, "scan", None):
        for key, value in zip(("scan_lo", "scan_hi", "step"), args.scan):
            raw[key] = (repr(value), cwd)
    if getattr(args, "feshbach", None):
        raw["feshbach"] = (args.feshbach, cwd)
    return job_from_raw(raw)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class Molecule:
    ground: LevelBasis
    bases: dict[str, LevelBasis]
    excited: list[tuple[LevelBasis, DipoleFunction]]
    pdm: DipoleFunction | None


def load_molecule(job: JobConfig) -> Molecule:
    if not job.curves:
        raise ConfigError("no curves configured")
    curves = {}
    for p in job.curves:
        c = load_curve(p)
        if c.label in curves:
            raise ConfigError(f"{p}: duplicate curve label {c.label!r}")
        curves[c.label] = c
    ground = job.ground or next(iter(curves))
    if ground not in curves:
        raise ConfigError(f"ground state {ground!r} is not among the curves {list(curves)}")

    grid = build_grid(list(curves.values()), job.reduced_mass,
                      config=GridConfig(N=job.N, beta=job.beta, R_max=job.R_max))
    log.info("grid: N=%d on [%.3f, %.3f] bohr", grid.N, grid.R_min, grid.R_max)
    bases: dict[str, LevelBasis] = {}
    coupled = set()
    for p in job.spin_orbit:
        soc = load_spin_orbit(p)
        for s in (soc.state_a, soc.state_b):
            if s not in curves:
                raise ConfigError(f"{p}: state {s!r} has no curve")
            if s in coupled:
                raise ConfigError(f"{p}: state {s!r} appears in two spin-orbit files")
        basis = solve_coupled(curves[soc.state_a], curves[soc.state_b], soc, grid, job.reduced_mass)
        bases[soc.state_a] = bases[soc.state_b] = basis
        coupled |= {soc.state_a, soc.state_b}
    for label, c in curves.items():
        if label not in bases:
            bases[label] = solve_single(c, grid, job.reduced_mass)

    pdm, excited, seen = None, [], set()
    for p in job.dipoles:
        d = load_dipole(p)
        ends = {d.from_state, d.to_state}
        if ends == {ground}:
            pdm = d
            continue
        if ground not in ends:
            raise ConfigError(f"{p}: dipole {d.from_state}-{d.to_state} does not involve {ground}")
        (other,) = ends - {ground}
        if other not in bases:
            raise ConfigError(f"{p}: no curve for state {other!r}")
        if other in seen:
            raise ConfigError(f"{p}: second dipole for state {other!r}")
        seen.add(other)
        excited.append((bases[other], d))
    return Molecule(bases[ground], bases, excited, pdm)


def transition_table(job: JobConfig, mol: Molecule, v: int | None = None) -> TransitionTable:
    v = job.v if v is None else v
    return build_transition_table(mol.ground, v, mol.excited, mol.pdm, job.lifetime_ns)


def table_alpha(table: TransitionTable, core: CoreModel, job: JobConfig):
    """Callable alpha_JM(w) for the analysis scans."""
    w = rotational_weights(job.J, job.M)
    wp, wq = float(w.w_par), float(w.w_perp)

    def alpha(omega):
        par, perp = alpha_sum(table, omega, job.convention)
        c = core_alpha(core, omega)
        return wp * (par + c) + wq * (perp + c)

    return alpha


def atom_pair_alpha(job: JobConfig):
    if not job.atom_lines:
        raise ConfigError("atom-pair Feshbach source needs atom_lines")
    atoms = [load_atomic_lines(p, job.lifetime_ns) for p in job.atom_lines]
    core = core_model(*job.core)

    def alpha(omega):
        total = sum(atom_alpha(lines, omega, job.convention) for lines in atoms)
        return total + core_alpha(core, omega)

    return alpha


def scan_grid(job: JobConfig, step: float | None = None) -> np.ndarray:
    lo, hi, default = job.scan
    step = step or default
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(n)
    return np.minimum(grid, hi)


def effective_response(m: EffectiveModel, omega_h: np.ndarray) -> ResponseSpectrum:
    """Spectrum of an effective model, Sigma counted as parallel and Pi as perpendicular."""
    w = np.asarray(omega_h, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = 6.0 * m.omega_sigma * m.d_sigma**2 / (m.omega_sigma**2 - w**2)
        p = 3.0 * m.omega_pi * m.d_pi**2 / (m.omega_pi**2 - w**2)
    c = core_alpha(m.core, w)
    return ResponseSpectrum(
        frequencies=w, alpha_par=s + c, alpha_perp=p + c, alpha_gr=np.zeros(len(w), dtype=complex),
        alpha_exc=(s + 2.0 * p) / 3.0 + c, convention="constant-sign",
        resonances=np.array([m.omega_sigma, m.omega_pi]),
    )


# ---------------------------------------------------------------------------
# output


def header(job: JobConfig, unit_line: str) -> list[str]:
    return [f"diapol {__version__}", f"config {job.digest()}", f"units {unit_line}"]


def write_json(path: Path, job: JobConfig, unit_line: str, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    out = {"tool": f"diapol {__version__}", "config_hash": job.digest(), "units": unit_line}
    out.update(doc)
    path.write_text(json.dumps(out, indent=2, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def read_ddp_csv(path) -> tuple[list[str], np.ndarray]:
    """Column names and data of a ddp CSV file."""
    path = Path(path)
    try:
        handle = path.open()
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    with handle:
        rows = (line for line in handle if not line.startswith("#"))
        names = next(rows, "").strip().split(",")
        if names[0] != DDP_COLUMNS[0]:
            raise ConfigError(f"{path}: not a ddp CSV file")
        data = np.loadtxt(rows, delimiter=",", ndmin=2)
    return names, data


def _print_model(m: EffectiveModel) -> None:
    print(f"{'molecule':<10} {'omega_Sigma (cm-1)':>19} {'d_Sigma (au)':>13} "
          f"{'omega_Pi (cm-1)':>16} {'d_Pi (au)':>10} {'rms (%)':>8}")
    rms = math.nan if m.fit_rms is None else m.fit_rms
    print(f"{m.name or '-':<10} {units.hartree_to_cm1(m.omega_sigma):19.2f} {m.d_sigma:13.4f} "
          f"{units.hartree_to_cm1(m.omega_pi):16.2f} {m.d_pi:10.4f} {rms:8.2f}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_levels(args) -> int:
    job = job_from_args(args)
    mol = load_molecule(job)
    states = [args.state] if args.state else sorted({b.state: None for b in mol.bases.values()})
    doc = {"molecule": job.molecule, "states": []}
    for label in states:
        basis = mol.bases.get(label) or next(
            (b for b in mol.bases.values() if b.state == label), None)
        if basis is None:
            raise ConfigError(f"unknown state {label!r}")
        n = len(basis) if args.vmax is None else min(len(basis), args.vmax + 1)
        E = units.hartree_to_cm1(basis.energies[:n] - basis.asymptote)
        B = units.hartree_to_cm1(basis.B[:n])
        records = []
        for v in range(n):
            rec = {"v": v, "E_cm-1": float(E[v]), "B_cm-1": float(B[v]), "kind": basis.kinds[v]}
            if len(basis.channels) > 1:
                rec["channel_fraction"] = [float(f) for f in basis.channel_fraction[v]]
            records.append(rec)
        doc["states"].append({
            "state": basis.state, "channels": list(basis.channels),
            "asymptote_cm-1": float(units.hartree_to_cm1(basis.asymptote)),
            "n_bound": basis.n_bound, "levels": records,
        })
        print(f"{basis.state}: {len(basis)} levels, {basis.n_bound} bound, written {n}")
        if args.wavefunctions:
            _write_wavefunctions(job, basis, n)
    write_json(job.output / "levels.json", job, "E and B in cm-1, E relative to the asymptote", doc)
    return 0


def _write_wavefunctions(job: JobConfig, basis: LevelBasis, n: int) -> None:
    cols = [basis.grid.nodes]
    names = ["R_bohr"]
    for v in range(n):
        for ch, name in enumerate(basis.channels):
            cols.append(basis.psi(v, ch))
            names.append(f"psi_{v}" if len(basis.channels) == 1 else f"psi_{v}_{name}")
    path = job.output / f"wavefunctions_{basis.state}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for line in header(job, "R bohr, psi bohr^-1/2"):
            fh.write(f"# {line}\n")
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, np.column_stack(cols), fmt=CSV_FMT, delimiter=",")


def cmd_ddp(args) -> int:
    job = job_from_args(args)
    core = core_model(*job.core)
    table = transition_table(job, load_molecule(job)) if job.curves else empty_table()
    weights = rotational_weights(job.J, job.M)
    grid_cm = scan_grid(job)
    job.output.mkdir(parents=True, exist_ok=True)
    paths = (job.output / "ddp.csv", job.output / "ddp_mhz.csv")
    with paths[0].open("w") as fa, paths[1].open("w") as fm:
        for fh, unit in ((fa, "a.u."), (fm, "MHz/(W/cm2)")):
            for line in header(job, f"omega cm-1, alpha {unit}"):
                fh.write(f"# {line}\n")
            fh.write(f"# convention {job.convention}, J={job.J} M={job.M}, v={job.v}\n")
            fh.write(",".join(DDP_COLUMNS) + "\n")
        for start in range(0, len(grid_cm), CHUNK):
            w_cm = grid_cm[start : start + CHUNK]
            sp = scan(table, core, units.cm1_to_hartree(w_cm), job.convention, weights)
            iso = sp.alpha_iso
            block = np.column_stack([
                w_cm, iso.real, iso.imag, sp.alpha_par.real, sp.alpha_perp.real,
                sp.gamma_aniso.real, sp.alpha_gr.real, sp.alpha_exc.real, sp.alpha_JM.real,
            ])
            np.savetxt(fa, block, fmt=CSV_FMT, delimiter=",")
            block[:, 1:] = units.au_to_mhz(block[:, 1:])
            np.savetxt(fm, block, fmt=CSV_FMT, delimiter=",")
    print(f"{len(grid_cm)} frequencies, {len(table)} transitions -> {paths[0]}")
    return 0


def cmd_fit_eff(args) -> int:
    job = job_from_args(args)
    core = core_model(*job.core)
    table = source = None
    if job.curves:
        table = transition_table(job, load_molecule(job))
    if args.ddp:
        names, data = read_ddp_csv(args.ddp)
        col = {n: data[:, i] for i, n in enumerate(names)}
        w = units.cm1_to_hartree(col["omega_cm-1"])
        spectrum = ResponseSpectrum(
            frequencies=w, alpha_par=col["re_alpha_par"] + 0j, alpha_perp=col["re_alpha_perp"] + 0j,
            alpha_gr=col["re_alpha_gr"] + 0j, alpha_exc=col["re_alpha_exc"] + 0j,
            convention=job.convention,
            resonances=table.electronic_resonances if table is not None else np.array([]),
        )
    else:
        w = units.cm1_to_hartree(scan_grid(job, args.fit_step))
        if table is not None:
            spectrum = scan(table, core, w, job.convention)
        elif job.effective_model is not None:
            source = EffectiveModel.load(job.effective_model)
            core = source.core
            w = w[~np.isin(w, [source.omega_sigma, source.omega_pi])]
            spectrum = effective_response(source, w)
        else:
            raise ConfigError("fit-eff needs curves, an effective_model or --ddp")
    windows = job.windows
    if not windows and table is not None:
        windows = tuple(resonance_windows(table))
    elif not windows and source is not None:
        windows = source.excluded_windows
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = fit_effective(spectrum, core, windows, table=table, name=job.molecule)
    for wmsg in caught:
        print(f"warning: {wmsg.message}", file=sys.stderr)
    path = job.output / "effective.json"
    doc = json.loads(m.to_json())
    write_json(path, job, "omega cm-1, d a.u., core d^2 a.u.", doc)
    _print_model(m)
    return 0


def cmd_tuneout(args) -> int:
    job = job_from_args(args)
    lo, hi, step = job.scan
    doc: dict = {"range_cm-1": [lo, hi], "step_cm-1": step}
    if job.effective_model is not None:
        m = EffectiveModel.load(job.effective_model)
        roots = find_tuneout(effective_spectrum(m), (lo, hi), step_cm=step)
        windows = m.excluded_windows
        doc["source"] = f"effective model {job.effective_model.name}"
        doc["closed_form_no_core_cm-1"] = units.hartree_to_cm1(tuneout_closed_form(m))
    else:
        core = core_model(*job.core)
        table = transition_table(job, load_molecule(job))
        roots = find_tuneout(table_alpha(table, core, job), (lo, hi), job.windows, step)
        windows = job.windows
        doc["source"] = f"sum over states, v={job.v}"
    inside = in_windows(np.array(roots), windows) if roots else []
    doc["roots"] = [{"omega_cm-1": r, "inside_window": bool(f)} for r, f in zip(roots, inside)]
    write_json(job.output / "tuneout.json", job, "cm-1", doc)
    if not roots:
        print("no tune-out frequency in range")
    for r, f in zip(roots, inside):
        print(f"tune-out {r:.6f} cm-1" + ("  (inside an excluded window)" if f else ""))
    return 0


def cmd_magic(args) -> int:
    job = job_from_args(args)
    core = core_model(*job.core)
    lo, hi, step = job.scan
    mol = table = None
    if job.effective_model is not None and not job.curves:
        alpha_g = effective_spectrum(EffectiveModel.load(job.effective_model))
    else:
        mol = load_molecule(job)
        table = transition_table(job, mol)
        alpha_g = table_alpha(table, core, job)

    sources = ("atom-pair", "last-bound-level") if job.feshbach == "both" else (job.feshbach,)
    reports = {}
    for source in sources:
        if source == "atom-pair":
            alpha_f = atom_pair_alpha(job)
        else:
            if mol is None:
                raise ConfigError("last-bound-level Feshbach source needs curves")
            v_last = mol.ground.n_bound - 1
            if v_last < 0:
                raise DataError(f"{mol.ground.state} has no bound levels")
            alpha_f = table_alpha(transition_table(job, mol, v_last), core, job)
        report = find_magic(alpha_g, alpha_f, (lo, hi), job.windows, step)
        reports[source] = report
        stem = "magic" if len(sources) == 1 else f"magic_{source}"
        doc = json.loads(report.to_json())
        doc["feshbach_source"] = source
        write_json(job.output / f"{stem}.json", job, "omega cm-1, alpha a.u. and MHz/(W/cm2)", doc)
        (job.output / f"{stem}.txt").write_text(report.table() + "\n")
        print(f"[{source}]")
        print(report.diagnostic or report.table())

    if len(sources) == 2:
        a, b = (reports[s].roots for s in sources)
        deltas = []
        for r in a:
            if b:
                near = min(b, key=lambda x: abs(x.omega_cm - r.omega_cm))
                deltas.append({"atom-pair": r.omega_cm, "last-bound-level": near.omega_cm,
                               "delta_cm-1": near.omega_cm - r.omega_cm})
        write_json(job.output / "magic_delta.json", job, "cm-1", {"pairs": deltas})
        for d in deltas:
            print(f"source delta at {d['atom-pair']:.4f} cm-1: {d['delta_cm-1']:+.4f} cm-1")
    return 0


def cmd_oracle(args) -> int:
    tl = TwoLevel(
        E1=0.0, E2=units.cm1_to_hartree(args.E2_cm), d12=args.d12,
        gamma2=units.cm1_to_hartree(args.width_cm), amplitude=args.field,
    )
    omega = units.cm1_to_hartree(args.omega_cm)
    result = twolevel_oracle(tl, omega)
    print(f"two-level system: E2={args.E2_cm} cm-1, d12={args.d12} au, width={args.width_cm} cm-1, "
          f"omega={args.omega_cm} cm-1")
    print(f"{'convention':<14} {'Re closed':>14} {'Re ODE':>14} {'Im closed':>14} {'Im ODE':>14} "
          f"{'rel err':>9}")
    worst = 0.0
    for conv in CONVENTIONS:
        exact = twolevel_alpha(tl, omega, conv)
        got = result.get(conv)
        err = max(abs(got.real - exact.real) / abs(exact.real), abs(got.imag - exact.imag) / abs(exact.imag))
        worst = max(worst, err)
        print(f"{conv:<14} {exact.real:14.7e} {got.real:14.7e} {exact.imag:14.7e} {got.imag:14.7e} "
              f"{err:9.2e}")
    print(f"window contamination {result.contamination:.1e}")
    return 0 if worst <= args.tolerance else 1


# ---------------------------------------------------------------------------
# argument parsing


def _job_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value job file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--output", help="output directory")
    p.add_argument("--mass-amu", dest="mass_amu", type=float, help="reduced mass (a.m.u.)")
    p.add_argument("--lifetime-ns", dest="lifetime_ns", type=float)
    p.add_argument("--convention", choices=CONVENTIONS)
    p.add_argument("--J", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--v", type=int, help="initial vibrational level")
    p.add_argument("--ground", help="label of the ground-state curve")
    p.add_argument("--R-max", dest="R_max", type=float, help="box radius (bohr)")
    p.add_argument("--beta", type=float, help="grid density factor")
    p.add_argument("--N", type=int, help="number of grid points")
    p.add_argument("--core", nargs="+", metavar="ION")
    p.add_argument("--scan", nargs=3, type=float, metavar=("LO", "HI", "STEP"),
                   help="frequency scan in cm-1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diapol", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"diapol {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("levels", help="vibrational levels of every state")
    _job_options(p)
    p.add_argument("--state", help="only this state")
    p.add_argument("--vmax", type=int, help="highest level written")
    p.add_argument("--wavefunctions", action="store_true", help="also write psi_v(R) CSV")
    p.set_defaults(func=cmd_levels)

    p = sub.add_parser("ddp", help="dynamic polarizability scan")
    _job_options(p)
    p.set_defaults(func=cmd_ddp)

    p = sub.add_parser("fit-eff", help="fit the two-transition effective model")
    _job_options(p)
    p.add_argument("--ddp", help="fit this ddp CSV instead of recomputing the spectrum")
    p.add_argument("--model", help="effective model JSON to fit when no curves are given")
    p.add_argument("--fit-step", dest="fit_step", type=float, default=1.0,
                   help="frequency step (cm-1) when the spectrum is recomputed")
    p.set_defaults(func=cmd_fit_eff)

    p = sub.add_parser("tuneout", help="zeros of Re alpha")
    _job_options(p)
    p.add_argument("--model", help="effective model JSON")
    p.set_defaults(func=cmd_tuneout)

    p = sub.add_parser("magic", help="magic frequencies against a Feshbach molecule")
    _job_options(p)
    p.add_argument("--model", help="effective model JSON for the ground state")
    p.add_argument("--feshbach", choices=FESHBACH_SOURCES)
    p.set_defaults(func=cmd_magic)

    p = sub.add_parser("oracle", help="two-level closed form against direct integration")
    p.add_argument("--E2-cm", dest="E2_cm", type=float, default=10000.0)
    p.add_argument("--d12", type=float, default=1.0)
    p.add_argument("--width-cm", dest="width_cm", type=float, default=100.0)
    p.add_argument("--omega-cm", dest="omega_cm", type=float, default=6000.0)
    p.add_argument("--field", type=float, default=1e-5, help="field amplitude (a.u.)")
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"diapol: error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"diapol: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
