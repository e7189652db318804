"""Command-line front end.

Every subcommand reads a :class:`RunConfig` (file, then ``--key value``
flags, then ``--set key=value``), writes CSV/JSON into ``out`` and returns
an exit code: 0 success, 1 failed identity check, 2 bad configuration,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import checks, dynamics, fermion_oracle, fractal, spectrum
from .config import ConfigError, RunConfig, config_keys, parse_pairs
from .export import atomic_write_text, fmt, write_csv, write_json
from .fibword import CapacityError, word_at_level
from .tracecore import fricke_vogt, surface_mesh, trace_map

log = logging.getLogger("fibising")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
BAND_HEADER = ("level", "a", "b")
SURFACE_TOL = 1e-9


def _pmap(cfg: RunConfig, fn, items):
    """Order-stable map over a thread pool of ``cfg.threads`` workers."""
    items = list(items)
    if cfg.threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, items))


def _offset(cfg: RunConfig, params=None) -> int:
    if cfg.N != "auto":
        return cfg.N
    return spectrum.choose_offset(params or cfg.params, cfg.levels, opts=cfg.scan_options)


def _warm(cfg: RunConfig, params, levels):
    """Compute band sets for ``levels`` in parallel; results land in the cache."""
    opts = cfg.scan_options
    _pmap(cfg, lambda k: spectrum.band_set(params, k, opts), sorted(set(levels)))


def _band_rows(bands: spectrum.BandSet, level: int):
    return [(level, a, b) for a, b in bands]


def _band_meta(bands: spectrum.BandSet) -> dict:
    return {
        "n_intervals": len(bands),
        "length": bands.length,
        "hull": list(bands.hull) if not bands.is_empty else None,
        "dropped": bands.dropped,
        "axis": bands.axis,
    }


def _start(cfg: RunConfig):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(cfg.out_dir / "run.cfg", cfg.dumps())


# --- subcommands -----------------------------------------------------------


def cmd_bands(cfg: RunConfig) -> int:
    params, opts = cfg.params, cfg.scan_options
    N = _offset(cfg)
    _warm(cfg, params, [cfg.k] + [N + cfg.k + i for i in range(3)])
    sigma = spectrum.band_set(params, cfg.k, opts)
    cover = spectrum.nested_cover(params, cfg.k, N, opts).bands
    energy = spectrum.symmetrize_to_energy(cover)
    out = cfg.out_dir
    write_csv(out / "sigma.csv", BAND_HEADER, _band_rows(sigma, cfg.k))
    write_csv(out / "cover.csv", BAND_HEADER, _band_rows(cover, cfg.k))
    write_csv(out / "energy.csv", BAND_HEADER, _band_rows(energy, cfg.k))
    write_json(out / "bands.json", {
        "J0": params.J0, "J1": params.J1, "r": params.r, "k": cfg.k, "N": N,
        "s_max": sigma.meta.get("s_max"), "density": sigma.meta.get("density"),
        "edge_tol": cfg.edge_tol,
        "sigma": _band_meta(sigma), "cover": _band_meta(cover), "energy": _band_meta(energy),
    })
    print(f"level {cfg.k}: {len(sigma)} bands (length {fmt(sigma.length)}); "
          f"cover N={N}: {len(cover)} bands (length {fmt(cover.length)})")
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    params, opts = cfg.params, cfg.scan_options
    N = _offset(cfg)
    _warm(cfg, params, [N + k + i for k in cfg.levels for i in range(3)])
    rows = spectrum.convergence_study(params, cfg.levels, N, opts)
    write_csv(cfg.out_dir / "converge.csv", ("k", "hausdorff", "length"),
              [(r.k, r.hausdorff, r.length) for r in rows])
    lengths = [r.length for r in rows]
    dists = [r.hausdorff for r in rows if r.hausdorff is not None]
    write_json(cfg.out_dir / "converge.json", {
        "J0": params.J0, "J1": params.J1, "N": N, "levels": cfg.levels,
        "length_strictly_decreasing": all(b < a for a, b in zip(lengths, lengths[1:])),
        "hausdorff_inversions": sum(b > a for a, b in zip(dists, dists[1:])),
    })
    for r in rows:
        print(f"k={r.k:3d}  length={fmt(r.length)}  hausdorff={fmt(r.hausdorff) or '-'}")
    return EXIT_OK


def _estimate_json(est: fractal.DimensionEstimate | None):
    if est is None:
        return None
    return {"value": est.value, "slope": est.slope, "stderr": est.stderr, "eps_range": list(est.eps_range)}


def cmd_dim(cfg: RunConfig) -> int:
    params, opts = cfg.params, cfg.scan_options
    N = _offset(cfg)
    _warm(cfg, params, [cfg.k] + [N + cfg.k + i for i in range(3)])
    sigma = spectrum.band_set(params, cfg.k, opts)
    profile = fractal.local_dimension_profile(params, cfg.k, cfg.windows, opts, bands=sigma)
    cover = spectrum.nested_cover(params, cfg.k, N, opts).bands
    glob = fractal.box_dimension(cover)

    out = cfg.out_dir
    write_csv(out / "profile.csv", ("center", "halfwidth", "n_intervals", "dim", "stderr", "low_confidence"), [
        (w.center, w.halfwidth, w.n_intervals,
         None if w.estimate is None else w.estimate.value,
         None if w.estimate is None else w.estimate.stderr,
         int(w.low_confidence))
        for w in profile.windows
    ])
    write_csv(out / "counts.csv", ("eps", "N"), glob.counts)

    def one(r):
        p = type(params).from_ratio(r, params.J1)
        n = _offset(cfg, p)
        return fractal.box_dimension(spectrum.nested_cover(p, cfg.k, n, opts).bands)

    sweep = _pmap(cfg, one, cfg.r_list)
    write_csv(out / "dims.csv", ("r", "dim", "stderr"), [(r, e.value, e.stderr) for r, e in zip(cfg.r_list, sweep)])
    write_json(out / "dim.json", {
        "J0": params.J0, "J1": params.J1, "k": cfg.k, "N": N,
        "global": _estimate_json(glob),
        "windows": [{"center": w.center, "halfwidth": w.halfwidth, "estimate": _estimate_json(w.estimate),
                     "low_confidence": w.low_confidence} for w in profile.windows],
    })
    print(f"global box dimension of the level-{cfg.k} cover: {fmt(glob.value)} +- {fmt(glob.stderr)}")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    params, opts = cfg.params, cfg.scan_options
    m = fermion_oracle.build_matrices(params, cfg.k)
    spec = fermion_oracle.oracle_spectrum(m)
    e = spec.energies
    write_csv(cfg.out_dir / "oracle.csv", ("mu", "s", "E_plus", "E_minus"),
              zip(spec.mu, spec.s_values, e, -e))
    report = fermion_oracle.containment_check(params, cfg.k, cfg.inflate, opts)

    samples = fermion_oracle.random_samples(np.random.default_rng(cfg.seed))
    errs = _pmap(cfg, lambda ps: fermion_oracle.recursion_equivalence([ps], 12), samples)
    worst = max(errs)
    write_json(cfg.out_dir / "containment.json", {
        "J0": params.J0, "J1": params.J1, "k": cfg.k, "n_sites": m.n, "inflate": cfg.inflate,
        "fraction": report.fraction, "violators": report.violators.tolist(),
        "literal_fraction": report.literal_fraction,
        "literal_violators": report.literal_violators.tolist(),
        "max_recursion_error": worst, "recursion_samples": len(samples),
    })
    print(f"{m.n} sites: containment {fmt(report.fraction)} "
          f"(same-level band set {fmt(report.literal_fraction)})")
    print(f"max relative recursion error (k<=12, {len(samples)} samples): {fmt(worst)}")
    return EXIT_OK


def _orbit_dump(cfg: RunConfig, point):
    """Rows (step, x, y, z, I), stopping after the first escape witness."""
    p = np.asarray(point, dtype=float)
    rows = []
    for step in range(cfg.dump_steps + 1):
        rows.append((step, *p.tolist(), float(fricke_vogt(p))))
        if dynamics.witness_mask(p, cfg.escape_threshold, cfg.strategy):
            break
        p = trace_map(p)
    return rows


def cmd_orbit(cfg: RunConfig) -> int:
    params = cfg.params
    if cfg.s_grid is None:
        s_end = cfg.s_max if cfg.s_max is not None else params.s_max
        grid = np.linspace(0.0, s_end, 1001)
    else:
        grid = np.linspace(*cfg.s_grid)
    chunks = np.array_split(grid, max(1, min(cfg.threads, grid.size)))
    fields = _pmap(cfg, lambda s: dynamics.escape_time_field(params, s, cfg.budget), chunks)
    rows = [row for f in fields for row in f.rows()]
    write_csv(cfg.out_dir / "escape.csv", ("s", "status", "steps"), [(s, st.value, n) for s, st, n in rows])
    n_esc = sum(st is dynamics.OrbitStatus.ESCAPED for _, st, _ in rows)
    print(f"{n_esc} of {len(rows)} grid points escaped")
    if cfg.point is not None:
        verdict = dynamics.classify_orbit(cfg.point, cfg.budget)
        dump = _orbit_dump(cfg, cfg.point)
        write_csv(cfg.out_dir / "orbit.csv", ("step", "x", "y", "z", "I"), dump)
        write_json(cfg.out_dir / "orbit.json", {
            "point": list(cfg.point), "status": verdict.status.name.lower(),
            "step": verdict.step, "steps_used": verdict.steps_used,
            "witness": None if verdict.witness is None else list(verdict.witness),
            "dump_rows": len(dump),
        })
        if verdict.escaped:
            print(f"point {list(cfg.point)}: Escaped at step {verdict.step}")
        else:
            print(f"point {list(cfg.point)}: Undecided after {verdict.steps_used} steps")
    return EXIT_OK


def cmd_surface(cfg: RunConfig) -> int:
    lo, hi = cfg.surface_window
    xs = np.linspace(lo, hi, cfg.surface_grid)
    rows, dropped = [], {}
    for V in cfg.V_list:
        pts = surface_mesh(V, xs, xs)
        good = np.abs(fricke_vogt(pts) - V) < SURFACE_TOL if len(pts) else np.zeros(0, bool)
        dropped[fmt(V)] = int((~good).sum())
        rows += [(x, y, z, V) for x, y, z in pts[good].tolist()]
    write_csv(cfg.out_dir / "surface.csv", ("x", "y", "z", "V"), rows)
    write_json(cfg.out_dir / "surface.json", {
        "window": list(cfg.surface_window), "grid": cfg.surface_grid, "V": list(cfg.V_list),
        "rows": len(rows), "dropped_inexact": dropped,
    })
    print(f"{len(rows)} surface points")
    return EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    results = checks.run_identity_suite(cfg.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {r.residual:10.3e}  <= {r.threshold:8.1e}  {'ok' if r.passed else 'FAIL'}")
    write_csv(cfg.out_dir / "check.csv", ("check", "residual", "threshold", "passed"),
              [(r.name, r.residual, r.threshold, int(r.passed)) for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def cmd_word(cfg: RunConfig) -> int:
    text = str(word_at_level(cfg.k))
    atomic_write_text(cfg.out_dir / f"word_{cfg.k}.txt", text + "\n")
    print(text)
    return EXIT_OK


COMMANDS = {
    "bands": (cmd_bands, "band sets, nested cover and energy-axis image"),
    "converge": (cmd_converge, "Hausdorff distances and lengths of consecutive covers"),
    "dim": (cmd_dim, "box-counting dimension: local profile, global and ratio sweep"),
    "oracle": (cmd_oracle, "free-fermion spectrum, containment and recursion check"),
    "orbit": (cmd_orbit, "escape-time field and optional orbit dump"),
    "surface": (cmd_surface, "sample the invariant surfaces I = V"),
    "check": (cmd_check, "algebraic identity suite"),
    "word": (cmd_word, "print the level-k substitution word"),
}


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    common.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    common.add_argument("-v", "--verbose", action="store_true")
    for key in config_keys():
        common.add_argument(f"--{key}", dest=f"cfg_{key}", metavar="VALUE", default=None)

    parser = argparse.ArgumentParser(prog="fibising", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def build_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    flags = {key: getattr(args, f"cfg_{key}") for key in config_keys() if getattr(args, f"cfg_{key}") is not None}
    sets = parse_pairs("\n".join(args.set)) if args.set else {}
    return cfg.with_overrides({**flags, **sets})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = build_config(args)
        if args.dump_config:
            sys.stdout.write(cfg.dumps())
            return EXIT_OK
        _start(cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handler = COMMANDS[args.command][0]
    try:
        return handler(cfg)
    except (ValueError, CapacityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
