"""Command-line front end: config parsing, sweeps, output writing.

One declarative JSON config drives every subcommand; CLI flags override
config keys.  All columns are written in laboratory units: rates in 1/s,
fields in mT, times in us.  Identical config plus seed produces
byte-identical output files (floats are formatted with %.10g).

Exit codes: 0 success, 2 configuration or usage error, 3 I/O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DnpError, LatticeError
from .liouville import (DensityOperator, NvModel, NvRates, evolve,
                        joint_lindblad, nuclear_polarizations,
                        nv_populations, nv_model, steady_state)
from .multispin import (EXACT_JOINT_MAX_SITES, exact_joint_steady,
                        meanfield_fixed_point, overhauser_stats,
                        spatial_report)
from .physmodel import (HfiTensor, NucleusSite, delta_n, export_sites,
                        import_sites, sample_lattice, spherical_position)
from .rates import golden_linewidth_mhz, rate_pair
from .singlespin import dnp_steady
from .units import per_us_to_per_s

RATE_METHODS = ("golden", "resolvent", "sector")
SWEEP_METHODS = ("lindblad", "golden", "resolvent")
EVOLVE_METHODS = ("lindblad", "golden")
MULTISPIN_METHODS = ("meanfield", "exact_joint")

_RATE_KEYS = ("radiative_mhz", "isc_mhz", "isc0_mhz", "singlet_mhz",
              "orbital_mhz", "dephasing_mhz")


def _fmt(x) -> str:
    """Stable text form: %.10g floats, lowercase booleans, plain ints."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.10g" % (float(x) + 0.0)


def _jfloat(x):
    """Float rounded through %.10g so JSON output is byte-stable."""
    return float("%.10g" % (float(x) + 0.0))


@dataclass(frozen=True)
class RunConfig:
    """Validated, immutable run description shared by all subcommands."""

    levels: str
    nv_rates: NvRates
    pump_rate_mhz: float | None
    omega_r_mhz: float | None
    laser_detuning_mhz: float
    gamma_dep_per_s: float
    include_excited_hfi: bool
    delta_shift_mhz: float
    b_grid: tuple
    sites: tuple
    method: str
    methods: tuple
    theta_grid_deg: tuple | None
    dipolar_r_a: float | None
    evolve_t_max_us: float
    evolve_steps: int
    report_fields_mt: tuple
    lattice_seed: int | None
    out_path: str | None
    out_format: str
    jobs: int


def _get(tree: dict, path: str, expect_type, default=None, required=False):
    """Walk a dotted path through nested dicts with typed errors."""
    node = tree
    parts = path.split(".")
    for i, key in enumerate(parts):
        if not isinstance(node, dict):
            raise ConfigError(f"{'.'.join(parts[:i])}: expected an object")
        if key not in node:
            if required:
                raise ConfigError(f"missing required config key: {path}")
            return default
        node = node[key]
    if expect_type is float and isinstance(node, (int, float)) \
            and not isinstance(node, bool):
        return float(node)
    if expect_type is int and isinstance(node, int) \
            and not isinstance(node, bool):
        return int(node)
    if not isinstance(node, expect_type) or (expect_type is not bool
                                             and isinstance(node, bool)):
        raise ConfigError(
            f"{path}: expected {expect_type.__name__}, "
            f"got {type(node).__name__}")
    return node


def _build_grid(tree: dict) -> tuple:
    start = _get(tree, "field.start_mt", float, required=True)
    stop = _get(tree, "field.stop_mt", float, default=start)
    points = _get(tree, "field.points", int, default=1)
    if points < 1:
        raise ConfigError("field.points: must be >= 1")
    if stop < start:
        raise ConfigError("field.stop_mt: grid must be monotone "
                          "(stop >= start)")
    if points == 1:
        return (start,)
    return tuple(np.linspace(start, stop, points))


def _site_from_record(rec: dict, index: int) -> NucleusSite:
    where = f"nuclei.sites[{index}]"
    if not isinstance(rec, dict):
        raise ConfigError(f"{where}: expected an object")
    try:
        pos = np.array([float(rec[k]) for k in ("x_a", "y_a", "z_a")])
    except KeyError as exc:
        raise ConfigError(f"{where}: missing coordinate {exc}") from None
    species = rec.get("species", "13C")
    try:
        ground = HfiTensor(np.array(rec["ground_tensor_mhz"], dtype=float))
    except KeyError:
        raise ConfigError(f"{where}: missing ground_tensor_mhz") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.ground_tensor_mhz: {exc}") from None
    exc_rec = rec.get("excited_tensor_mhz")
    try:
        excited = (HfiTensor(np.array(exc_rec, dtype=float))
                   if exc_rec is not None else ground)
        return NucleusSite.from_tensors(pos, ground, excited, species)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _build_sites(tree: dict) -> tuple[tuple, int | None, float | None]:
    """Returns (sites, lattice_seed, dipolar_r) from the nuclei source."""
    src = tree.get("nuclei")
    if src is None:
        raise ConfigError("missing required config key: nuclei")
    if isinstance(src, str):
        if src == "builtin:first_shell":
            return (NucleusSite.first_shell(),), None, None
        raise ConfigError(f"nuclei: unknown builtin source {src!r}")
    if not isinstance(src, dict):
        raise ConfigError("nuclei: expected a string or object")
    keys = set(src)
    if keys == {"lattice"}:
        seed = _get(src, "lattice.seed", int, required=True)
        r_min = _get(src, "lattice.r_min_a", float, default=3.0)
        r_max = _get(src, "lattice.r_max_a", float, default=36.5)
        abundance = _get(src, "lattice.abundance", float, default=0.011)
        try:
            sites = sample_lattice(seed, r_min, r_max, abundance)
        except (ValueError, LatticeError) as exc:
            raise ConfigError(f"nuclei.lattice: {exc}") from None
        if not sites:
            raise ConfigError(
                "nuclei.lattice: the draw produced an empty ensemble "
                "(raise abundance or widen the radial window)")
        return tuple(sites), seed, None
    if keys == {"dipolar"}:
        r_a = _get(src, "dipolar.r_a", float, required=True)
        theta = _get(src, "dipolar.theta_deg", float, default=0.0)
        phi = _get(src, "dipolar.phi_deg", float, default=0.0)
        try:
            site = NucleusSite.dipolar(spherical_position(
                r_a, math.radians(theta), math.radians(phi)))
        except ValueError as exc:
            raise ConfigError(f"nuclei.dipolar: {exc}") from None
        return (site,), None, r_a
    if keys == {"sites"}:
        recs = src["sites"]
        if not isinstance(recs, list) or not recs:
            raise ConfigError("nuclei.sites: expected a non-empty list")
        return (tuple(_site_from_record(r, i) for i, r in enumerate(recs)),
                None, None)
    if keys == {"file"}:
        path = _get(src, "file", str, required=True)
        sites = import_sites(path)
        if not sites:
            raise ConfigError(f"nuclei.file: {path} holds no sites")
        return tuple(sites), None, None
    raise ConfigError(
        "nuclei: expected 'builtin:first_shell' or exactly one of the "
        "keys lattice / dipolar / sites / file")


def load_config(path: str, command: str, out_override: str | None = None,
                jobs: int = 1) -> RunConfig:
    """Parse and validate the JSON config for one subcommand."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            tree = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(tree, dict):
        raise ConfigError("config root must be an object")

    rate_kwargs = {}
    for key in _RATE_KEYS:
        val = _get(tree, f"model.rates.{key}", float)
        if val is not None:
            rate_kwargs[key] = val
    try:
        nv_rates = NvRates(**rate_kwargs)
    except ValueError as exc:
        raise ConfigError(f"model.rates: {exc}") from None

    pump_rate = _get(tree, "model.pump_rate_mhz", float)
    omega_r = _get(tree, "model.omega_r_mhz", float)
    if (pump_rate is None) == (omega_r is None):
        raise ConfigError("model: set exactly one of pump_rate_mhz and "
                          "omega_r_mhz")
    laser_det = _get(tree, "model.laser_detuning_mhz", float, default=0.0)
    levels = _get(tree, "model.levels", str, default="five")
    if levels not in ("five", "seven"):
        raise ConfigError("model.levels: must be 'five' or 'seven'")
    gamma_dep = _get(tree, "model.gamma_dep_per_s", float, default=1.0)
    if gamma_dep < 0:
        raise ConfigError("model.gamma_dep_per_s: must be >= 0")
    include_exc = _get(tree, "model.include_excited_hfi", bool, default=True)
    shift = _get(tree, "model.delta_shift_mhz", float, default=0.0)

    b_grid = _build_grid(tree)
    sites, lattice_seed, dipolar_r = _build_sites(tree)

    methods_list = tree.get("methods")
    if methods_list is not None:
        if (not isinstance(methods_list, list) or not methods_list
                or not all(isinstance(m, str) for m in methods_list)):
            raise ConfigError("methods: expected a non-empty list of "
                              "strings")
        methods = tuple(methods_list)
    else:
        # the lattice command only draws and exports sites, so a method
        # key is meaningless there
        required = command != "lattice"
        methods = (_get(tree, "method", str, required=required,
                        default="meanfield"),)
    method = methods[0]

    theta_grid = None
    tmap = tree.get("theta_map")
    if tmap is not None:
        t0 = _get(tree, "theta_map.start_deg", float, required=True)
        t1 = _get(tree, "theta_map.stop_deg", float, required=True)
        tn = _get(tree, "theta_map.points", int, required=True)
        if tn < 1 or t1 < t0:
            raise ConfigError("theta_map: need points >= 1 and a monotone "
                              "range")
        theta_grid = tuple(np.linspace(t0, t1, tn)) if tn > 1 else (t0,)
        if dipolar_r is None:
            raise ConfigError("theta_map: requires the dipolar nuclei "
                              "source")

    t_max = _get(tree, "evolve.t_max_us", float, default=12.0)
    steps = _get(tree, "evolve.steps", int, default=240)
    if t_max <= 0 or steps < 2:
        raise ConfigError("evolve: need t_max_us > 0 and steps >= 2")

    report = tree.get("report_fields_mt", [])
    if not isinstance(report, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            for v in report):
        raise ConfigError("report_fields_mt: expected a list of numbers")

    out_path = out_override or _get(tree, "output.path", str)
    out_format = _get(tree, "output.format", str, default="csv")
    if out_format not in ("csv", "json"):
        raise ConfigError("output.format: must be 'csv' or 'json'")
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")

    cfg = RunConfig(levels=levels, nv_rates=nv_rates,
                    pump_rate_mhz=pump_rate, omega_r_mhz=omega_r,
                    laser_detuning_mhz=laser_det,
                    gamma_dep_per_s=gamma_dep,
                    include_excited_hfi=include_exc,
                    delta_shift_mhz=shift, b_grid=b_grid, sites=sites,
                    method=method, methods=methods,
                    theta_grid_deg=theta_grid, dipolar_r_a=dipolar_r,
                    evolve_t_max_us=t_max, evolve_steps=steps,
                    report_fields_mt=tuple(float(v) for v in report),
                    lattice_seed=lattice_seed, out_path=out_path,
                    out_format=out_format, jobs=jobs)
    _check_compat(cfg, command)
    return cfg


def _check_compat(cfg: RunConfig, command: str) -> None:
    allowed = {"rates": RATE_METHODS, "sweep": SWEEP_METHODS,
               "evolve": EVOLVE_METHODS, "multispin": MULTISPIN_METHODS,
               "lattice": None}[command]
    if allowed is not None:
        for m in cfg.methods:
            if m not in allowed:
                raise ConfigError(
                    f"method {m!r} is not usable with '{command}' "
                    f"(choose from {', '.join(allowed)})")
    n = len(cfg.sites)
    if command in ("rates", "sweep", "evolve") and n != 1:
        raise ConfigError(f"{command}: needs a single-site config "
                          f"(got {n} sites)")
    if "lindblad" in cfg.methods and n > 2:
        raise ConfigError(f"lindblad: at most 2 nuclei (got {n})")
    if "exact_joint" in cfg.methods and n > EXACT_JOINT_MAX_SITES:
        raise ConfigError(
            f"exact_joint: at most {EXACT_JOINT_MAX_SITES} nuclei "
            f"(got {n})")
    if command == "evolve" and len(cfg.b_grid) != 1:
        raise ConfigError("evolve: needs field.points = 1")
    if command == "evolve" and n != 1:
        raise ConfigError("evolve: needs a single-site config")


def _model_at(cfg: RunConfig, b_mt: float) -> NvModel:
    try:
        return nv_model(b_mt, rate_mhz=cfg.pump_rate_mhz,
                        omega_r_mhz=cfg.omega_r_mhz, levels=cfg.levels,
                        laser_detuning_mhz=cfg.laser_detuning_mhz,
                        rates=cfg.nv_rates,
                        delta_shift_mhz=cfg.delta_shift_mhz)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    print(f"wrote {path}", file=sys.stderr)


def _csv(header: list, rows: list) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _rates_point(cfg: RunConfig, b_mt: float) -> list:
    model = _model_at(cfg, b_mt)
    site = cfg.sites[0]
    row = [b_mt, model.detuning_mhz,
           delta_n(b_mt, site.ground_tensor.a_zz, site.gamma_n_mhz_per_t),
           golden_linewidth_mhz(model)]
    totals = []
    for m in cfg.methods:
        pair = rate_pair(model, site, method=m)
        res = dnp_steady(pair, model, cfg.gamma_dep_per_s)
        row.extend([per_us_to_per_s(pair.w_plus),
                    per_us_to_per_s(pair.w_minus), res.p_ss])
        totals.append(pair.total)
    if len(totals) == 2:
        scale = max(totals)
        row.append(abs(totals[0] - totals[1]) / scale if scale > 0 else 0.0)
    return row


def cmd_rates(cfg: RunConfig) -> int:
    header = ["B_mT", "Delta_MHz", "Delta_N_MHz", "Gamma_MHz"]
    for m in cfg.methods:
        header.extend([f"W_plus_per_s_{m}", f"W_minus_per_s_{m}",
                       f"p_ss_{m}"])
    if len(cfg.methods) == 2:
        header.append("rel_discrepancy")
    rows = _map_grid(cfg, _rates_point)
    _write_text(cfg.out_path, _csv(header, rows))
    return 0


def _sweep_point(cfg: RunConfig, b_mt: float, theta_deg: float | None = None,
                 ) -> list:
    model = _model_at(cfg, b_mt)
    if theta_deg is None:
        site = cfg.sites[0]
    else:
        site = NucleusSite.dipolar(spherical_position(
            cfg.dipolar_r_a, math.radians(theta_deg), 0.0))
    if cfg.method == "lindblad":
        op = joint_lindblad(model, [site],
                            include_excited_hfi=cfg.include_excited_hfi)
        rho = steady_state(op)
        p_ss = float(nuclear_polarizations(rho, model, [site])[0])
        pair = rate_pair(model, site, method="resolvent")
        res = dnp_steady(pair, model, cfg.gamma_dep_per_s)
    else:
        pair = rate_pair(model, site, method=cfg.method)
        res = dnp_steady(pair, model, cfg.gamma_dep_per_s)
        p_ss = res.p_ss
    row = [b_mt]
    if theta_deg is not None:
        row.append(theta_deg)
    row.extend([p_ss, per_us_to_per_s(res.w),
                per_us_to_per_s(res.w_plus), per_us_to_per_s(res.w_minus),
                res.markovian_valid])
    return row


def _sweep_payload(args) -> list:
    cfg, b_mt, theta = args
    return _sweep_point(cfg, b_mt, theta)


def _rates_payload(args) -> list:
    cfg, b_mt = args
    return _rates_point(cfg, b_mt)


def _map_grid(cfg: RunConfig, fn) -> list:
    payloads = [(cfg, b) for b in cfg.b_grid]
    worker = _rates_payload if fn is _rates_point else _sweep_payload
    if fn is _sweep_point:
        thetas = (cfg.theta_grid_deg if cfg.theta_grid_deg is not None
                  else (None,))
        payloads = [(cfg, b, t) for b in cfg.b_grid for t in thetas]
    if cfg.jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(worker, payloads, chunksize=4))
    return [worker(p) for p in payloads]


def cmd_sweep(cfg: RunConfig) -> int:
    header = ["B_mT"]
    if cfg.theta_grid_deg is not None:
        header.append("theta_deg")
    header.extend(["p_ss", "W_per_s", "W_plus_per_s", "W_minus_per_s",
                   "markovian_valid"])
    rows = _map_grid(cfg, _sweep_point)
    _write_text(cfg.out_path, _csv(header, rows))
    return 0


def cmd_evolve(cfg: RunConfig, t_max_us: float | None = None,
               steps: int | None = None) -> int:
    t_max = cfg.evolve_t_max_us if t_max_us is None else t_max_us
    n = cfg.evolve_steps if steps is None else steps
    if t_max <= 0 or n < 2:
        raise ConfigError("evolve: need t_max_us > 0 and steps >= 2")
    t = np.linspace(0.0, t_max, n)
    b_mt = cfg.b_grid[0]
    model = _model_at(cfg, b_mt)
    site = cfg.sites[0]
    if cfg.method == "golden":
        pair = rate_pair(model, site, method="golden")
        res = dnp_steady(pair, model, cfg.gamma_dep_per_s, t_us=t, p0=0.0)
        rows = [[ti, pi] for ti, pi in zip(t, res.p_t)]
        _write_text(cfg.out_path, _csv(["t_us", "p"], rows))
        return 0
    op = joint_lindblad(model, [site],
                        include_excited_hfi=cfg.include_excited_hfi)
    nv_dim = model.dim
    rho_nv = np.zeros((nv_dim, nv_dim), dtype=complex)
    rho_nv[model.index("0g"), model.index("0g")] = 1.0
    rho_nuc = np.eye(site.multiplicity) / site.multiplicity
    rho0 = DensityOperator(np.kron(rho_nv, rho_nuc), labels=op.labels)
    states = evolve(op, rho0, t)
    header = ["t_us", "p"] + [f"pop_{lab}" for lab in model.labels]
    rows = []
    for ti, rho in zip(t, states):
        p = float(nuclear_polarizations(rho, model, [site])[0])
        pops = nv_populations(rho, model, [site])
        rows.append([ti, p] + [pops[lab] for lab in model.labels])
    _write_text(cfg.out_path, _csv(header, rows))
    return 0


def cmd_multispin(cfg: RunConfig) -> int:
    sites = list(cfg.sites)
    flagged = set()
    for target in cfg.report_fields_mt:
        flagged.add(int(np.argmin(np.abs(np.array(cfg.b_grid) - target))))
    rows = []
    points = []
    p_warm = None
    for k, b in enumerate(cfg.b_grid):
        model = _model_at(cfg, b)
        if cfg.method == "meanfield":
            ens = meanfield_fixed_point(sites, model,
                                        gamma_dep_per_s=cfg.gamma_dep_per_s,
                                        p_init=p_warm)
            p_warm = ens.polarizations
            h_ss = overhauser_stats(ens).mean_mhz
            iters, residual = ens.iterations, ens.residual
        else:
            dist = exact_joint_steady(sites, model,
                                      gamma_dep_per_s=cfg.gamma_dep_per_s)
            ens = dist.as_ensemble(sites, cfg.gamma_dep_per_s)
            h_ss = dist.overhauser_moments(sites).mean_mhz
            iters, residual = 0, dist.residual
        rows.append([b, ens.p_bar, h_ss, iters, residual])
        point = {"B_mT": _jfloat(b), "p_bar": _jfloat(ens.p_bar),
                 "h_ss_MHz": _jfloat(h_ss)}
        if k in flagged:
            rep = spatial_report(ens)
            point["sites"] = [
                {"x": _jfloat(r["x_a"]), "y": _jfloat(r["y_a"]),
                 "z": _jfloat(r["z_a"]), "p": _jfloat(r["p"])}
                for r in rep.records]
            point["bin_edges_a"] = [_jfloat(v) for v in rep.bin_edges_a]
            point["bin_mean_p"] = [None if np.isnan(v) else _jfloat(v)
                                   for v in rep.bin_mean_p]
        points.append(point)
    if cfg.out_format == "json":
        _write_text(cfg.out_path, json.dumps(points, indent=1) + "\n")
    else:
        _write_text(cfg.out_path, _csv(
            ["B_mT", "p_bar", "h_ss_MHz", "iterations", "residual"], rows))
        if flagged and cfg.out_path is not None:
            side = cfg.out_path.rsplit(".", 1)[0] + ".json"
            _write_text(side, json.dumps(
                [points[k] for k in sorted(flagged)], indent=1) + "\n")
    return 0


def cmd_lattice(cfg: RunConfig) -> int:
    if cfg.out_path is None:
        raise ConfigError("lattice: requires --out (or output.path) for "
                          "the site JSON")
    export_sites(list(cfg.sites), cfg.out_path)
    print(f"wrote {len(cfg.sites)} sites to {cfg.out_path}",
          file=sys.stderr)
    return 0


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dnp",
        description="Optically pumped NV-nucleus DNP simulations near the "
                    "ground-state level anticrossing")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("rates", "flip-rate table over the field grid"),
            ("sweep", "steady-state polarization sweep (CSV)"),
            ("evolve", "polarization build-up trajectory (CSV)"),
            ("multispin", "many-nucleus steady state (CSV/JSON)"),
            ("lattice", "draw and export a nuclear site list (JSON)")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for grid points")
        p.add_argument("--out", default=None,
                       help="output path (overrides output.path)")
        if name == "evolve":
            p.add_argument("--t-max", type=float, default=None,
                           dest="t_max", help="trajectory length in us")
            p.add_argument("--steps", type=int, default=None,
                           help="number of samples on the trajectory")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command, out_override=args.out,
                          jobs=args.jobs)
        if args.command == "rates":
            return cmd_rates(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "evolve":
            return cmd_evolve(cfg, t_max_us=args.t_max, steps=args.steps)
        if args.command == "multispin":
            return cmd_multispin(cfg)
        return cmd_lattice(cfg)
    except (ConfigError, LatticeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except DnpError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
