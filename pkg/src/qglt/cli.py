"""qglt command line: solve, verify, sweep, search, oracle.

Exit codes: 0 success, 2 a check failed, 1 usage or input error.
Settings come from flags, then the TOML file named by QGLT_CONFIG, then
built-in defaults.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .discretize import assemble_star
from .eigensolve import negative_spectrum, riesz_mean
from .errors import QGLTError
from .functionals import (check_decoupling, check_mono, check_split_bound, check_theorem1,
                          lt_ratio, star_spectrum)
from .graph import (EdgePotential, GridSpec, LinePotential, PotentialField, StarGraph, load_field,
                    potential_norm, radial_field, symmetric_extension)
from .oracle import secular_bound_states
from .search import SearchConfig, maximize_ratio
from .symmetry import (sweep_grid, translation_sweep, verify_neumann_dirichlet_split,
                       verify_sector_identity)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2

DEFAULTS = {
    "edges": None,
    "h": 0.01,
    "len": 30.0,
    "gamma": 0.5,
    "far_bc": "dirichlet",
    "format": "json",
    "jobs": None,  # logical cores
    "seed": 0,
    "tol_eig": 1e-10,
    "tol_zero": 1e-10,
}
IDENTITY_TOL = 1e-8
DECOUPLING_TOL = 1e-9
SWEEP_NOISE = 1e-6
SWEEP_GAP = 0.02
CHECKS = ("sector", "lemma", "cut-even", "cut-split", "theorem1", "theorem2", "split-bound", "mono")


class UsageError(QGLTError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    flags: dict
    inputs: dict = field(default_factory=dict)
    version: str = __version__
    timestamp: str = ""
    seed: int = 0

    def to_json(self) -> dict:
        return {"command": self.command, "flags": self.flags, "inputs": self.inputs,
                "version": self.version, "timestamp": self.timestamp, "seed": self.seed}


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# settings
# ---------------------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"QGLT_CONFIG: no such file {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"QGLT_CONFIG: {exc}") from exc
    out = {}
    for key, value in raw.items():
        k = key.replace("-", "_")
        if k not in DEFAULTS:
            raise UsageError(f"QGLT_CONFIG: unknown setting '{key}'")
        out[k] = value
    return out


def resolve_settings(args) -> tuple[dict, set]:
    """Layer flags over config over defaults; also report which keys were set explicitly."""
    cfg = load_config(os.environ.get("QGLT_CONFIG"))
    settings = dict(DEFAULTS)
    settings.update(cfg)
    explicit = set(cfg)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v
            explicit.add(key)
    if settings["jobs"] is None:
        settings["jobs"] = os.cpu_count() or 1
    _validate(settings)
    return settings, explicit


def _validate(s: dict) -> None:
    checks = [
        ("h", s["h"] > 0, "--h must be positive"),
        ("len", s["len"] > 0, "--len must be positive"),
        ("tol_eig", s["tol_eig"] > 0, "--tol-eig must be positive"),
        ("tol_zero", s["tol_zero"] > 0, "--tol-zero must be positive"),
        ("jobs", int(s["jobs"]) >= 1, "--jobs must be >= 1"),
        ("far_bc", s["far_bc"] in ("dirichlet", "neumann"), "--far-bc must be dirichlet or neumann"),
        ("format", s["format"] in ("json", "tsv"), "--format must be json or tsv"),
    ]
    if s["edges"] is not None:
        checks.append(("edges", int(s["edges"]) >= 1, "--edges must be >= 1"))
    for _, ok, msg in checks:
        if not ok:
            raise UsageError(msg)


def make_grid(s: dict, length: float | None = None) -> GridSpec:
    L = s["len"] if length is None else length
    h = s["h"]
    return GridSpec.from_length(h, h * math.ceil(L / h - 1e-9), s["far_bc"])


def read_potential(args, s: dict, inputs: dict, required: bool = True):
    """(graph, field) from --potential and --edges; a one-edge file is a radial profile."""
    path = getattr(args, "potential", None)
    if path is None:
        if required:
            raise UsageError("--potential is required")
        return None, None
    try:
        fld = load_field(path)
    except FileNotFoundError as exc:
        raise UsageError(f"--potential: no such file {path}") from exc
    inputs[path] = sha256_file(path)
    n = s["edges"]
    if n is None or int(n) == fld.n_edges:
        return fld.graph, fld
    n = int(n)
    if fld.n_edges == 1:
        g = StarGraph(n)
        return g, radial_field(g, fld.per_edge[0])
    raise UsageError(f"--edges {n} does not match the potential file (n_edges={fld.n_edges})")


def radial_profile(fld: PotentialField) -> EdgePotential:
    if not fld.is_radial:
        raise UsageError("this check needs a radial potential (identical profile on every edge)")
    return fld.per_edge[0]


def line_from(fld: PotentialField) -> LinePotential:
    if fld.n_edges == 1:
        return symmetric_extension(fld.per_edge[0])
    if fld.n_edges == 2:
        return LinePotential.from_field(fld)
    raise UsageError("a line potential needs a file with n_edges 1 (even profile) or 2")


def parse_floats(text: str, flag: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from exc


def parse_ints(text: str, flag: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag}: expected comma-separated integers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def emit(manifest: RunManifest, result, fmt: str, rows=None, header=None, out=None) -> None:
    """JSON document with embedded manifest, or TSV with the manifest as a comment line."""
    out = out or sys.stdout
    if fmt == "tsv" and rows is not None:
        out.write("# manifest " + json.dumps(_jsonable(manifest.to_json()), sort_keys=True) + "\n")
        out.write("\t".join(header) + "\n")
        for r in rows:
            out.write("\t".join(_fmt_cell(c) for c in r) + "\n")
        return
    doc = {"manifest": manifest.to_json(), "result": result}
    out.write(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _fmt_cell(c) -> str:
    if isinstance(c, (bool, np.bool_)):
        return "true" if c else "false"
    if isinstance(c, (float, np.floating)):
        return f"{float(c):.12g}"
    return "" if c is None else str(c)


# ---------------------------------------------------------------------------
# verify checks (top-level so worker processes can run them)
# ---------------------------------------------------------------------------

def _check_sector(graph, fld, grid, gamma, s, opts):
    r = verify_sector_identity(graph, radial_profile(fld), grid, gamma, s["tol_eig"], s["tol_zero"])
    r["passed"] = bool(r["rel_residual"] <= IDENTITY_TOL and r["multiset_distance"] <= IDENTITY_TOL)
    return r


def _check_lemma(graph, fld, grid, gamma, s, opts):
    r = verify_neumann_dirichlet_split(radial_profile(fld), grid, gamma, s["tol_eig"], s["tol_zero"])
    r["passed"] = bool(r["rel_residual"] <= IDENTITY_TOL and r["multiset_distance"] <= IDENTITY_TOL
                       and r["neumann_bound_ok"])
    return r


def _check_cut(graph, fld, grid, gamma, s, opts):
    r = check_decoupling(graph, fld, grid, opts.get("subset"), gammas=(gamma,),
                         tol_eig=s["tol_eig"], tol_zero=s["tol_zero"], tol=DECOUPLING_TOL)
    return r


def _check_theorem1(graph, fld, grid, gamma, s, opts):
    rep = check_theorem1(graph, fld, gamma, grid, s["tol_eig"], s["tol_zero"])
    return dict(rep.to_json(), check="theorem1")


def _check_split(graph, fld, grid, gamma, s, opts):
    rep = check_split_bound(graph, fld, gamma, grid, opts["edge"], s["tol_eig"], s["tol_zero"])
    return dict(rep.to_json(), check="split-bound")


def _check_mono(graph, fld, grid, gamma, s, opts):
    rep = check_mono(graph, fld, gamma, grid, opts["n0"], opts.get("constant_n0"),
                     s["tol_eig"], s["tol_zero"])
    return dict(rep.to_json(), check="mono", n0=opts["n0"])


def _check_theorem2(graph, fld, grid, gamma, s, opts):
    line = line_from(fld)
    target = StarGraph(opts["target_edges"])
    sw = translation_sweep(line, target, opts["offsets"], gamma, grid, radial=opts["radial"],
                           tol_eig=s["tol_eig"], tol_zero=s["tol_zero"], jobs=opts.get("jobs", 1))
    gaps = sw.rel_gaps
    monotone = bool(np.all(np.diff(gaps) <= SWEEP_NOISE))
    out = sw.to_json()
    out.update(check="theorem2", n_edges=target.n_edges, radial=opts["radial"],
               monotone=monotone, final_gap=float(gaps[-1]),
               passed=bool(monotone and gaps[-1] <= SWEEP_GAP), grid=grid.to_dict())
    return out


_RUNNERS = {
    "sector": _check_sector,
    "lemma": _check_lemma,
    "cut-even": _check_cut,
    "cut-split": _check_cut,
    "theorem1": _check_theorem1,
    "theorem2": _check_theorem2,
    "split-bound": _check_split,
    "mono": _check_mono,
}


def _run_task(task):
    name, graph, fld, grid, gamma, s, opts = task
    return _RUNNERS[name](graph, fld, grid, gamma, s, opts)


def _split_subsets(n: int, max_size: int = 2) -> list:
    return [list(c) for k in range(1, max_size + 1) if k < n
            for c in itertools.combinations(range(1, n + 1), k)]


def _plan_checks(name, args, graph, fld, grid, gamma, s) -> list:
    """Expand one named check into concrete tasks."""
    N = graph.n_edges
    base = (graph, fld, grid, gamma, s)
    if name == "cut-split":
        subsets = [parse_ints(args.subset, "--subset")] if args.subset else _split_subsets(N)
        return [(name, *base, {"subset": sub}) for sub in subsets]
    if name == "split-bound":
        edges = [args.edge] if args.edge else list(range(1, N + 1))
        return [(name, *base, {"edge": e}) for e in edges]
    if name == "mono":
        n0s = [args.n0] if args.n0 else [k for k in range(1, N, 2)]
        return [(name, *base, {"n0": k, "constant_n0": args.constant_n0}) for k in n0s]
    if name == "theorem2":
        offsets = parse_floats(args.offsets, "--offsets")
        line = line_from(fld)
        g2 = grid
        if "len" not in s.get("_explicit", ()):
            g2 = sweep_grid(line, offsets, s["h"])
            g2 = GridSpec(g2.step, g2.points_per_edge, s["far_bc"])
        opts = {"offsets": offsets, "radial": args.radial, "target_edges": args.target_edges}
        return [(name, graph, fld, g2, gamma, s, opts)]
    return [(name, *base, {})]


def _suite_names(graph: StarGraph, fld: PotentialField) -> list:
    N = graph.n_edges
    names = ["theorem1"]
    if fld.is_radial:
        names += ["sector", "lemma"]
    if N % 2 == 0:
        names.append("cut-even")
    elif N > 1:
        names += ["cut-split", "split-bound", "mono"]
    return names


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(args, s, manifest):
    graph, fld = read_potential(args, s, manifest.inputs)
    grid = make_grid(s)
    op = assemble_star(graph, fld, grid)
    spec = negative_spectrum(op, s["tol_eig"], s["tol_zero"])
    gamma = s["gamma"]
    tr = riesz_mean(spec, gamma)
    norm = potential_norm(fld, gamma)
    if args.dump_operator:
        with open(args.dump_operator, "w") as fh:
            json.dump(_jsonable(op.to_json()), fh)
    result = {
        "n_edges": graph.n_edges,
        "gamma": gamma,
        "spectrum": spec.to_json(),
        "riesz": tr,
        "norm": norm,
        "ratio": tr / norm if norm > 0 else None,
        "grid": grid.to_dict(),
    }
    rows = [(k, e) for k, e in enumerate(spec.eigenvalues)]
    emit(manifest, result, s["format"], rows, ("k", "eigenvalue"))
    return EXIT_OK


def cmd_verify(args, s, manifest):
    if not args.check and not args.suite:
        raise UsageError("verify: name a check or pass --suite")
    graph, fld = read_potential(args, s, manifest.inputs)
    grid = make_grid(s)
    gamma = s["gamma"]
    names = _suite_names(graph, fld) if args.suite else [args.check]
    tasks = []
    for name in names:
        tasks += _plan_checks(name, args, graph, fld, grid, gamma, s)
    jobs = int(s["jobs"])
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        if len(tasks) == 1 and tasks[0][0] == "theorem2":
            tasks[0][6]["jobs"] = jobs
        results = [_run_task(t) for t in tasks]
    for r in results:
        r.setdefault("check", names[0])
    passed = all(r.get("passed", True) for r in results)
    result = {"passed": passed, "checks": results}
    rows = [(r["check"], r.get("passed"), _summary(r)) for r in results]
    emit(manifest, result, s["format"], rows, ("check", "passed", "summary"))
    return EXIT_OK if passed else EXIT_CHECK


def _summary(r: dict) -> str:
    for key in ("rel_residual", "margin", "max_violation", "final_gap"):
        if key in r and r[key] is not None:
            return f"{key}={_fmt_cell(float(r[key]))}"
    return ""


def cmd_sweep(args, s, manifest):
    graph, fld = read_potential(args, s, manifest.inputs)
    line = line_from(fld)
    offsets = parse_floats(args.offsets, "--offsets")
    target = StarGraph(args.target_edges)
    if "len" in s["_explicit"]:
        grid = make_grid(s)
    else:
        g = sweep_grid(line, offsets, s["h"])
        grid = GridSpec(g.step, g.points_per_edge, s["far_bc"])
    sw = translation_sweep(line, target, offsets, s["gamma"], grid, radial=args.radial,
                           tol_eig=s["tol_eig"], tol_zero=s["tol_zero"], jobs=int(s["jobs"]))
    result = dict(sw.to_json(), n_edges=target.n_edges, radial=args.radial, grid=grid.to_dict())
    rows = [(a, r, sw.line_ratio, gap) for a, r, gap in zip(sw.offsets, sw.ratios, sw.rel_gaps)]
    emit(manifest, result, s["format"], rows, ("a", "ratio", "line_ratio", "rel_gap"))
    return EXIT_OK


def cmd_search(args, s, manifest):
    N = int(s["edges"]) if s["edges"] is not None else 3
    graph = StarGraph(N)
    gamma = s["gamma"]
    cfg = SearchConfig(cells_per_edge=args.cells, cell_width=args.cell_width,
                       max_iters=args.max_iters, restarts=args.restarts, symmetrize=args.symmetrize,
                       seed=int(s["seed"]), min_value=args.min_value, tol_eig=min(s["tol_eig"], 1e-11))
    grid = make_grid(s)
    res = maximize_ratio(graph, gamma, cfg, grid, jobs=int(s["jobs"]))
    best = check_theorem1(graph, res.best_field, gamma, grid, s["tol_eig"], s["tol_zero"])
    worst = max(v for _, _, v in res.iterate_trace) if res.iterate_trace else 0.0
    # no iterate may beat a proven bound
    over = best.bound is not None and worst > best.bound * (1 + 1e-4)
    passed = bool(best.passed and not over)
    result = dict(res.to_json(), n_edges=N, gamma=gamma, config=cfg.resolved(grid).to_json(),
                  theorem1=best.to_json(), max_iterate_ratio=worst, passed=passed,
                  grid=grid.to_dict())
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(res.trace_tsv())
    rows = [(r, i, v) for r, i, v in res.iterate_trace]
    emit(manifest, result, s["format"], rows, ("restart", "iteration", "ratio"))
    return EXIT_OK if passed else EXIT_CHECK


def cmd_oracle(args, s, manifest):
    graph, fld = read_potential(args, s, manifest.inputs)
    spec = secular_bound_states(graph, fld, kappa_max=args.kappa_max, n_scan=args.n_scan,
                                tol_zero=s["tol_zero"])
    gamma = s["gamma"]
    result = {"n_edges": graph.n_edges, "gamma": gamma, "eigenvalues": spec.eigenvalues,
              "riesz": riesz_mean(spec, gamma)}
    disc = None
    if args.compare:
        grid = make_grid(s)
        disc = star_spectrum(graph, fld, grid, s["tol_eig"], s["tol_zero"]).eigenvalues
        k = min(len(disc), len(spec.eigenvalues))
        result["discrete"] = {"eigenvalues": disc, "grid": grid.to_dict(),
                              "count_match": len(disc) == len(spec.eigenvalues),
                              "max_abs_diff": float(np.max(np.abs(disc[:k] - spec.eigenvalues[:k])))
                              if k else 0.0}
    rows = [(k, e, None if disc is None or k >= len(disc) else disc[k])
            for k, e in enumerate(spec.eigenvalues)]
    emit(manifest, result, s["format"], rows, ("k", "oracle", "discrete"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--edges", type=int, help="number of edges N")
    g.add_argument("--potential", metavar="FILE", help="potential JSON")
    g.add_argument("--gamma", type=float, help="Riesz exponent (default 0.5)")
    g.add_argument("--h", type=float, help="grid step (default 0.01)")
    g.add_argument("--len", type=float, help="truncated edge length (default 30)")
    g.add_argument("--far-bc", dest="far_bc", choices=("dirichlet", "neumann"))
    g.add_argument("--format", choices=("json", "tsv"))
    g.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    g.add_argument("--seed", type=int)
    g.add_argument("--tol-eig", dest="tol_eig", type=float)
    g.add_argument("--tol-zero", dest="tol_zero", type=float)

    p = _Parser(prog="qglt", description="Negative spectra and Lieb-Thirring checks on star graphs.")
    p.add_argument("--version", action="version", version=f"qglt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("solve", parents=[common], help="negative spectrum, Riesz mean and ratio")
    sp.add_argument("--dump-operator", metavar="FILE", help="write the assembled operator as JSON")

    sp = sub.add_parser("verify", parents=[common], help="check an identity or bound")
    sp.add_argument("check", nargs="?", choices=CHECKS)
    sp.add_argument("--suite", action="store_true", help="run every check that applies")
    sp.add_argument("--subset", help="cut-split: comma-separated 1-based edges (default: all of size <= 2)")
    sp.add_argument("--edge", type=int, help="split-bound: distinguished edge (default: all)")
    sp.add_argument("--n0", type=int, help="mono: odd N0 < N (default: all)")
    sp.add_argument("--constant-n0", dest="constant_n0", type=float,
                    help="mono: value of L_(gamma,N0) (default (N0+1)/N0 L)")
    sp.add_argument("--offsets", default="2,4,8,16", help="theorem2: translation offsets")
    sp.add_argument("--target-edges", dest="target_edges", type=int, default=3,
                    help="theorem2: edges of the target star")
    sp.add_argument("--radial", action="store_true", help="theorem2: translate onto every edge")

    sp = sub.add_parser("sweep", parents=[common], help="ratio of far-translated line potentials")
    sp.add_argument("--offsets", default="2,4,8,16")
    sp.add_argument("--target-edges", dest="target_edges", type=int, default=3)
    sp.add_argument("--radial", action="store_true")

    sp = sub.add_parser("search", parents=[common], help="maximize the ratio over cell potentials")
    sp.add_argument("--cells", type=int, default=50, help="cells per edge")
    sp.add_argument("--cell-width", dest="cell_width", type=float, help="default 4h")
    sp.add_argument("--max-iters", dest="max_iters", type=int, default=200)
    sp.add_argument("--restarts", type=int, default=3)
    sp.add_argument("--symmetrize", action="store_true", help="radial profiles only")
    sp.add_argument("--min-value", dest="min_value", type=float, help="cell value floor (default -0.02/h^2)")
    sp.add_argument("--trace", metavar="FILE", help="write the iterate trace as TSV")

    sp = sub.add_parser("oracle", parents=[common], help="transfer-matrix bound states")
    sp.add_argument("--kappa-max", dest="kappa_max", type=float)
    sp.add_argument("--n-scan", dest="n_scan", type=int, default=2000)
    sp.add_argument("--compare", action="store_true", help="also solve the discretized operator")
    return p


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep, "search": cmd_search,
            "oracle": cmd_oracle}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        s, explicit = resolve_settings(args)
        flags = {k: v for k, v in vars(args).items() if k not in DEFAULTS and k != "command"}
        manifest = RunManifest(
            command=args.command + (f" {args.check}" if getattr(args, "check", None) else ""),
            flags=dict(s, **flags),
            timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            seed=int(s["seed"]),
        )
        s["_explicit"] = explicit
        return COMMANDS[args.command](args, s, manifest)
    except (QGLTError, ValueError, IndexError) as exc:
        print(f"qglt: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
