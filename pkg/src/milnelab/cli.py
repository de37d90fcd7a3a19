"""Command-line entry points: ``milne``, ``disk``, ``expand``, ``verify``, ``probe``.

Settings come from built-in defaults, then an optional JSON ``--config``
file, then explicit flags.  The output directory may also be overridden by
the ``MILNELAB_OUTPUT_DIR`` environment variable.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import disk as disk_mod
from . import expansion as exp_mod
from .discretization import AngularQuadrature, DiskGrid, GridError, RadialGrid
from .geometry import GEOMETRIC, NONE, DomainError, ForceField, force_bounds_suite
from .milne import (DIFFUSIVE, INFLOW, CompatibilityError, ConvergenceError, MilneProblem,
                    check_compatibility, max_principle_margin, solve_diffusive, solve_inflow)

SCHEMA_VERSION = 1
OUTPUT_ENV = "MILNELAB_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_COMPATIBILITY = 4
EXIT_INVARIANT = 5

DEFAULTS = {
    "eps": [0.1],
    "g": None,          # cos:1:2, or cos:3 for probes
    "force": GEOMETRIC,
    "bc": INFLOW,
    "n_angles": 64,
    "n_eta": 400,
    "length": 30.0,
    "ratio": 1.15,
    "first": 2e-3,
    "n_theta": 1,
    "disk_angles": 128,
    "solver": "direct",
    "damping": 1.0,
    "tol": 1e-10,
    "normalization": 0.0,
    "variant": "both",
    "order": 0,
    "levels": 5,
    "suite": "force",
    "out": ".",
}


class ConfigError(ValueError):
    pass


# -- boundary data mini-language -------------------------------------------------

@dataclass(frozen=True)
class BoundarySpec:
    """``const:<c>``, ``cos:<k>[:shift]`` (``cos(k phi) + shift``) or ``table:<path>``."""

    text: str
    kind: str
    params: tuple

    @classmethod
    def parse(cls, text):
        parts = str(text).split(":", 1)
        kind = parts[0].strip()
        rest = parts[1] if len(parts) > 1 else ""
        try:
            if kind == "const":
                return cls(text, kind, (float(rest),))
            if kind == "cos":
                nums = rest.split(":")
                if not 1 <= len(nums) <= 2:
                    raise ValueError
                k = int(nums[0])
                shift = float(nums[1]) if len(nums) == 2 else 0.0
                return cls(text, kind, (k, shift))
        except ValueError:
            raise ConfigError(f"malformed boundary spec {text!r}") from None
        if kind == "table":
            return cls(text, kind, _read_table(rest))
        raise ConfigError(f"unknown boundary spec {text!r}")

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.kind == "const":
            return np.full(phi.shape, self.params[0])
        if self.kind == "cos":
            k, shift = self.params
            return np.cos(k * phi) + shift
        ang, val = self.params
        return np.interp(np.mod(phi, 2 * np.pi), ang, val)

    def g(self, theta, phi):
        return self(np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))[1])


def _read_table(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read table {path!r}: {exc}") from None
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows])
    except (ValueError, IndexError):
        # allow one header row
        try:
            data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
        except (ValueError, IndexError):
            raise ConfigError(f"table {path!r} must have two numeric columns") from None
    if data.ndim != 2 or data.shape[0] < 2:
        raise ConfigError(f"table {path!r} needs at least two rows")
    order = np.argsort(data[:, 0])
    ang, val = data[order, 0], data[order, 1]
    if ang[0] > 1e-3 or ang[-1] < np.pi - 1e-3 or not np.all(np.isfinite(val)):
        raise ConfigError(f"table {path!r} must cover the incoming range [0, pi]")
    return tuple(ang), tuple(val)


# -- configuration ---------------------------------------------------------------

def _eps_list(value):
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        try:
            return [float(x) for x in value.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"bad epsilon list {value!r}") from None
    return [float(x) for x in value]


def resolve_config(args):
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config: {exc}") from None
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    env_out = os.environ.get(OUTPUT_ENV)
    if env_out:
        cfg["out"] = env_out
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["g"] is None:
        cfg["g"] = "cos:3" if getattr(args, "command", None) == "probe" else "cos:1:2"
    cfg["eps"] = _eps_list(cfg["eps"])
    _validate(cfg)
    return cfg


def _validate(cfg):
    if not cfg["eps"] or any(not 0 < e < 1 for e in cfg["eps"]):
        raise ConfigError("epsilon values must lie in (0, 1)")
    for key in ("n_angles", "disk_angles"):
        if int(cfg[key]) < 8 or int(cfg[key]) % 4:
            raise ConfigError(f"{key} must be a multiple of 4, at least 8")
    if int(cfg["n_eta"]) < 8 or float(cfg["length"]) <= 0 or int(cfg["n_theta"]) < 1:
        raise ConfigError("invalid grid parameters")
    if cfg["force"] not in (GEOMETRIC, NONE):
        raise ConfigError(f"force must be {GEOMETRIC} or {NONE}")
    if cfg["bc"] not in (INFLOW, DIFFUSIVE):
        raise ConfigError(f"bc must be {INFLOW} or {DIFFUSIVE}")
    if int(cfg["order"]) not in (0, 1):
        raise ConfigError("order must be 0 or 1")
    if not 0 < float(cfg["damping"]) <= 1:
        raise ConfigError("damping must lie in (0, 1]")
    if float(cfg["tol"]) <= 0:
        raise ConfigError("tol must be positive")


def _out_dir(cfg):
    path = Path(cfg["out"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path, payload):
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w") as fh:
        json.dump(_plain(payload), fh, sort_keys=True, indent=1, allow_nan=True)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# -- milne -------------------------------------------------------------------------

def _milne_problem(cfg, eps):
    spec = BoundarySpec.parse(cfg["g"])
    grid = RadialGrid.graded(float(cfg["length"]), int(cfg["n_eta"]), float(cfg["ratio"]),
                             float(cfg["first"]))
    return MilneProblem(ForceField(eps, mode=cfg["force"]), spec, boundary_kind=cfg["bc"],
                        grid=grid, quad=AngularQuadrature(int(cfg["n_angles"])),
                        normalization=float(cfg["normalization"]))


def milne_invariants(record):
    """Invariants recomputed from a serialized Milne solution."""
    f = np.asarray(record["f"], dtype=float)
    diag = record["diagnostics"]
    return {
        "f_min": float(f.min()),
        "f_max": float(f.max()),
        "f_infinity": float(record["f_infinity"]),
        "orthogonality_max": float(np.max(np.abs(diag["orthogonality_residual"]))),
        "weighted_flux_spread": float(np.ptp(diag["weighted_flux"])),
        "wall_moment": float(record["wall_moment"]),
    }


def cmd_milne(cfg):
    out = _out_dir(cfg)
    for eps in cfg["eps"]:
        prob = _milne_problem(cfg, eps)
        solve = solve_diffusive if cfg["bc"] == DIFFUSIVE else solve_inflow
        sol = solve(prob, solver=cfg["solver"], tol=float(cfg["tol"]))
        record = sol.to_dict()
        record.update(epsilon=eps, force=cfg["force"], bc=cfg["bc"], g=cfg["g"])
        inv = milne_invariants(record)
        record["invariants"] = inv
        record["max_principle_margin"] = max_principle_margin(sol)
        stem = f"milne_eps{eps:g}"
        _write_json(out / f"{stem}.json", record)
        d = sol.diagnostics
        _write_csv(out / f"{stem}_diagnostics.csv",
                   ["eta", "alpha", "beta", "orthogonality_residual", "weighted_flux"],
                   zip(d.eta, d.alpha, d.beta, d.orthogonality_residual, d.weighted_flux))
        print(f"eps={eps:g} force={cfg['force']} bc={cfg['bc']} g={cfg['g']}")
        print(f"  f_inf = {sol.f_infinity:.10g}")
        print(f"  K0 = {sol.decay_K0:.6g} ({sol.decay.kind})")
        print(f"  max-principle margin = {record['max_principle_margin']:.3e}")
        print(f"  orthogonality max residual = {inv['orthogonality_max']:.3e}")
        print(f"  iterations = {sol.iterations}, flags = {sol.flags}")
    return EXIT_OK


# -- disk -------------------------------------------------------------------------

def _disk_problem(cfg, eps, g=None):
    spec = BoundarySpec.parse(cfg["g"]) if g is None else g
    grid = DiskGrid.build(eps, n_angles=int(cfg["disk_angles"]), n_theta=int(cfg["n_theta"]))
    return disk_mod.DiskProblem(eps, spec.g, cfg["bc"], grid, theta_independent=True)


def _disk_method(cfg):
    return {"direct": "direct", "krylov": "krylov", "damped": "damped"}.get(cfg["solver"],
                                                                           "direct")


def cmd_disk(cfg):
    out = _out_dir(cfg)
    for eps in cfg["eps"]:
        fld = disk_mod.solve(_disk_problem(cfg, eps), method=_disk_method(cfg),
                             tol=float(cfg["tol"]), damping=float(cfg["damping"]))
        stem = f"disk_eps{eps:g}"
        rec = fld.to_dict()
        rec["g"] = cfg["g"]
        _write_json(out / f"{stem}.json", rec)
        g = fld.problem.grid
        rows = [(r, t, p, fld.u[i, j, k])
                for i, r in enumerate(g.radii) for j, t in enumerate(g.thetas)
                for k, p in enumerate(g.quad.nodes)]
        _write_csv(out / f"{stem}.csv", ["r", "theta", "phi", "u"], rows)
        print(f"eps={eps:g}: u in [{fld.u.min():.6g}, {fld.u.max():.6g}], "
              f"residual {fld.residual:.2e}, consistency {fld.audit['consistency']:.2e}")
    return EXIT_OK


# -- expand -------------------------------------------------------------------------

def _variants(cfg):
    v = cfg["variant"]
    if v == "both":
        return exp_mod.VARIANTS
    if v not in exp_mod.VARIANTS:
        raise ConfigError(f"variant must be classical, geometric or both, not {v!r}")
    return (v,)


def run_sweep(cfg):
    spec = BoundarySpec.parse(cfg["g"])
    refs = {eps: disk_mod.solve(_disk_problem(cfg, eps, spec), method=_disk_method(cfg))
            for eps in cfg["eps"]}

    def make(variant, eps):
        return exp_mod.ExpansionSpec(variant, spec.g, order=int(cfg["order"]),
                                     boundary_kind=cfg["bc"], epsilon=eps,
                                     n_angles=int(cfg["disk_angles"]),
                                     n_eta=int(cfg["n_eta"]), length=float(cfg["length"]))
    return exp_mod.epsilon_sweep(make, cfg["eps"], refs, _variants(cfg))


def cmd_expand(cfg):
    out = _out_dir(cfg)
    sweep = run_sweep(cfg)
    with open(out / "expansion.csv", "w", newline="") as fh:
        fh.write(sweep.to_csv())
    _write_json(out / "expansion.json", {"g": cfg["g"], "bc": cfg["bc"],
                                         "reports": [r.to_dict() for r in sweep.reports],
                                         "monotone": sweep.monotone})
    sys.stdout.write(sweep.to_csv())
    return EXIT_OK


# -- verify -------------------------------------------------------------------------

def _suite_force(cfg):
    results = []
    for eps in cfg["eps"]:
        for c in force_bounds_suite(ForceField(eps)):
            results.append((f"eps={eps:g} {c.name}", c.passed, c.value))
    return results


def _suite_milne(cfg):
    results = []
    for eps in cfg["eps"]:
        for mode in (GEOMETRIC, NONE):
            local = dict(cfg, force=mode, bc=INFLOW, g="cos:1:2")
            sol = solve_inflow(_milne_problem(local, eps))
            tol = sol.problem.quad.tolerance()
            tag = f"eps={eps:g} {mode}"
            results.append((f"{tag} max principle", max_principle_margin(sol) >= -tol,
                            max_principle_margin(sol)))
            orth = float(np.max(np.abs(sol.diagnostics.orthogonality_residual)))
            results.append((f"{tag} orthogonality", orth <= 5 * tol, orth))
            results.append((f"{tag} decay rate positive", sol.decay_K0 > 0, sol.decay_K0))
            for c in (7.0, -1.5):
                const = solve_inflow(_milne_problem(dict(local, g=f"const:{c}"), eps))
                dev = float(np.max(np.abs(const.f - c)))
                results.append((f"{tag} constant {c:g}", dev <= 1e-10, dev))
        for text, expect in (("const:1", False), ("cos:1", True), ("cos:3", True)):
            prob = _milne_problem(dict(cfg, bc=DIFFUSIVE, g=text), eps)
            comp = check_compatibility(prob)
            results.append((f"eps={eps:g} compatibility {text}", comp.passed == expect,
                            comp.defect))
    return results


def _suite_disk(cfg):
    results = []
    for eps in cfg["eps"]:
        local = dict(cfg, bc=INFLOW)
        const = disk_mod.solve(_disk_problem(dict(local, g="const:2"), eps))
        dev = float(np.max(np.abs(const.u - 2.0)))
        results.append((f"eps={eps:g} constant", dev <= 1e-10, dev))
        fld = disk_mod.solve(_disk_problem(dict(local, g="cos:1:2"), eps))
        tol = fld.problem.grid.quad.tolerance()
        ok = fld.u.min() >= 1 - tol and fld.u.max() <= 3 + tol
        results.append((f"eps={eps:g} maximum principle", ok, float(fld.u.min())))
        results.append((f"eps={eps:g} average consistency", fld.audit["consistency"] < 1e-8,
                        fld.audit["consistency"]))
    return results


def _suite_expansion(cfg):
    results = []
    for eps in cfg["eps"]:
        g = BoundarySpec.parse("const:2").g
        for variant in exp_mod.VARIANTS:
            comp = exp_mod.build_composite(exp_mod.ExpansionSpec(
                variant, g, epsilon=eps, n_angles=int(cfg["n_angles"])))
            grid = DiskGrid.build(eps, n_angles=int(cfg["n_angles"]))
            dev = float(np.max(np.abs(comp.on_grid(grid) - 2.0)))
            results.append((f"eps={eps:g} {variant} constant composite", dev <= 1e-10, dev))
        comp = exp_mod.build_composite(exp_mod.ExpansionSpec(
            GEOMETRIC, BoundarySpec.parse("cos:1").g, boundary_kind=DIFFUSIVE, epsilon=eps,
            n_angles=int(cfg["n_angles"])))
        grid = DiskGrid.build(eps, n_angles=int(cfg["n_angles"]))
        dev = float(np.max(np.abs(comp.on_grid(grid))))
        results.append((f"eps={eps:g} diffusive order-0 composite vanishes", dev <= 1e-8, dev))
    for n in (0.5, 1.0, 2.0):
        G = lambda p: 3.0 + 0 * p
        ok = (abs(exp_mod.point_formula_flat(n, 3.0, G, 0.1) - 3.0) < 1e-15
              and abs(exp_mod.point_formula_geometric(n, 3.0, G, 0.1) - 3.0) < 1e-15)
        results.append((f"point formulas exact for constants, n={n:g}", ok, 0.0))
    return results


SUITES = {"force": _suite_force, "milne": _suite_milne, "disk": _suite_disk,
          "expansion": _suite_expansion}


def cmd_verify(cfg):
    suite = cfg["suite"]
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    results = SUITES[suite](cfg)
    failed = 0
    for name, ok, value in results:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({float(value):.6g})")
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_INVARIANT


# -- probe --------------------------------------------------------------------------

def cmd_probe(cfg, kind):
    g = BoundarySpec.parse(cfg["g"])
    if kind == "grazing":
        rows = exp_mod.grazing_probe(g, levels=int(cfg["levels"]))
    else:
        rows = exp_mod.grazing_probe_diffusive(g, levels=int(cfg["levels"]))
    out = _out_dir(cfg)
    header = ["n_angles", "phi_min", "fbar0", "f0", "derivative", "growth"]
    table = [[getattr(r, h) for h in header] for r in rows]
    _write_csv(out / f"probe_{kind}.csv", header, table)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for r in table:
        w.writerow([_fmt(v) for v in r])
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--eps", help="epsilon or comma-separated list")
    p.add_argument("--g", help="boundary data: const:c | cos:k[:shift] | table:path")
    p.add_argument("--bc", choices=(INFLOW, DIFFUSIVE))
    p.add_argument("--n-angles", dest="n_angles", type=int)
    p.add_argument("--n-eta", dest="n_eta", type=int)
    p.add_argument("--length", type=float, help="slab length L")
    p.add_argument("--ratio", type=float, help="radial grading ratio")
    p.add_argument("--first", type=float, help="first radial cell width")
    p.add_argument("--n-theta", dest="n_theta", type=int)
    p.add_argument("--disk-angles", dest="disk_angles", type=int)
    p.add_argument("--solver", help="direct | iterate | anderson | krylov | damped")
    p.add_argument("--damping", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="milnelab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    m = sub.add_parser("milne", help="solve one Milne problem per epsilon")
    _common(m)
    m.add_argument("--force", choices=(GEOMETRIC, NONE))
    m.add_argument("--normalization", type=float)
    d = sub.add_parser("disk", help="solve the kinetic problem in the disk")
    _common(d)
    e = sub.add_parser("expand", help="composite expansion errors over an epsilon sweep")
    _common(e)
    e.add_argument("--variant", choices=("classical", "geometric", "both"))
    e.add_argument("--order", type=int)
    v = sub.add_parser("verify", help="run an invariant suite")
    _common(v)
    v.add_argument("--suite", choices=sorted(SUITES))
    p = sub.add_parser("probe", help="grazing-derivative probes")
    _common(p)
    p.add_argument("kind", choices=("grazing", "grazing-diffusive"))
    p.add_argument("--levels", type=int)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "milne":
            return cmd_milne(cfg)
        if args.command == "disk":
            return cmd_disk(cfg)
        if args.command == "expand":
            return cmd_expand(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_probe(cfg, args.kind)
    except CompatibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPATIBILITY
    except (ConvergenceError, disk_mod.DiskConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, GridError, DomainError, exp_mod.ExpansionRefused, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
