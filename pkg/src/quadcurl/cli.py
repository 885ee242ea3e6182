"""Command-line driver: verification suites and the convergence experiments.

Each experiment writes a CSV (stable schema, deterministic bytes for a fixed
configuration), mirrors the table on stdout, and renders a matplotlib figure
next to the CSV unless --no-plot is given.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import experiments as X
from .mesh import OddSubdivision


def _fmt(x, width=16):
    if isinstance(x, float):
        if math.isnan(x):
            return "".ljust(width)
        return f"{x:.10e}".ljust(width)
    return str(x).ljust(width)


def _csv_cell(x):
    if isinstance(x, float):
        return "" if math.isnan(x) else f"{x:.10e}"
    return str(x)


def _write_csv(path: Path, header, rows, keys):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[k]) for k in keys))
    path.write_text("\n".join(lines) + "\n")


def _print_table(header, rows, keys):
    print("  ".join(h.ljust(16) for h in header))
    for row in rows:
        print("  ".join(_fmt(row[k]) for k in keys))


def _plot_errors(path, rows, keys, labels, title, ylabel):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    hs = [row["h"] for row in rows]
    plotted = 0
    for key, label in zip(keys, labels):
        vals = [row[key] for row in rows]
        pts = [(h, v) for h, v in zip(hs, vals) if not math.isnan(v) and v > 0]
        if not pts:
            continue
        ax.loglog(*zip(*pts), "o-", label=label)
        plotted += 1
    ax.set_xlabel("h")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    if plotted:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _parse_ns(parser, text, default):
    if not text:
        return default
    try:
        ns = tuple(int(p) for p in text.split(","))
    except ValueError:
        parser.error(f"bad size list {text!r}")
    if any(n < 1 for n in ns):
        parser.error("mesh sizes must be positive")
    return ns


EX1_HEADER = ["h", "err_l2", "rate_l2", "err_curl", "rate_curl",
              "err_curl2", "rate_curl2"]
EX1_KEYS = ["h", "err_l2", "rate_l2", "err_curl", "rate_curl",
            "err_curl2", "rate_curl2"]
EX2_HEADER = ["h", "norm_l2", "norm_curl", "norm_curl2", "energy_err", "rate"]
EX2_KEYS = ["h", "norm_l2", "norm_curl", "norm_curl2", "energy_err", "rate"]


def _progress(msg):
    print(f"[quadcurl] {msg}", file=sys.stderr, flush=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quadcurl",
        description="Tetrahedral curl-curl conforming elements: verification "
                    "and quad-curl convergence experiments.")
    parser.add_argument("command",
                        choices=["example1", "example2", "example3",
                                 "verify-element", "conformity",
                                 "interp-study"])
    parser.add_argument("--n", default=None,
                        help="comma-separated mesh subdivisions")
    parser.add_argument("--quad-degree", type=int, default=14)
    parser.add_argument("--tol", type=float, default=1e-10,
                        help="linear solver relative-residual tolerance")
    parser.add_argument("--precision", choices=["verify-exact", "solve-float"],
                        default=None)
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--rebuild-reference", action="store_true",
                        help="recompute and re-serialize the reference basis")
    parser.add_argument("--bc-mode", choices=["minimal", "all"],
                        default="minimal")
    parser.add_argument("--no-plot", action="store_true")
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.rebuild_reference:
        from .reference import reference_basis
        _progress("rebuilding reference basis (exact rational solve)")
        reference_basis(rebuild=True)

    try:
        if args.command == "example1":
            ns = _parse_ns(parser, args.n, (2, 3, 4))
            rows = X.run_example1(ns, quad_degree=args.quad_degree,
                                  tol=args.tol, bc_mode=args.bc_mode,
                                  progress=_progress)
            _write_csv(out / "example1.csv", EX1_HEADER, rows, EX1_KEYS)
            _print_table(EX1_HEADER, rows, EX1_KEYS)
            if not args.no_plot:
                _plot_errors(out / "example1.png", rows,
                             ["err_l2", "err_curl", "err_curl2"],
                             ["L2", "curl", "curl-curl"],
                             "unit cube, manufactured solution", "error")
            return 0

        if args.command in ("example2", "example3"):
            if args.command == "example2":
                ns = _parse_ns(parser, args.n, (1, 2, 4))
                rows = X.run_example2(ns, quad_degree=args.quad_degree,
                                      tol=args.tol, bc_mode=args.bc_mode,
                                      progress=_progress)
            else:
                ns = _parse_ns(parser, args.n, (2, 4))
                if any(n % 2 for n in ns):
                    parser.error("example3 requires even mesh sizes")
                rows = X.run_example3(ns, quad_degree=args.quad_degree,
                                      tol=args.tol, bc_mode=args.bc_mode,
                                      progress=_progress)
            name = args.command
            for row in rows:
                row.pop("field", None)
            _write_csv(out / f"{name}.csv", EX2_HEADER, rows, EX2_KEYS)
            _print_table(EX2_HEADER, rows, EX2_KEYS)
            if not args.no_plot:
                _plot_errors(out / f"{name}.png", rows, ["energy_err"],
                             ["energy error estimate"],
                             f"{name}: constant source", "energy error")
            return 0

        if args.command == "interp-study":
            ns = _parse_ns(parser, args.n, (1, 2, 3))
            rows = X.run_interp_study(ns, quad_degree=args.quad_degree,
                                      progress=_progress)
            _write_csv(out / "interp_study.csv", EX1_HEADER, rows, EX1_KEYS)
            _print_table(EX1_HEADER, rows, EX1_KEYS)
            if not args.no_plot:
                _plot_errors(out / "interp_study.png", rows,
                             ["err_l2", "err_curl", "err_curl2"],
                             ["L2", "curl", "curl-curl"],
                             "interpolation errors", "error")
            return 0

        if args.command == "verify-element":
            exact = args.precision != "solve-float"
            checks = X.run_verification(rebuild=args.rebuild_reference,
                                        exact=exact, progress=_progress)
            failed = [c for c in checks if not c["ok"]]
            for c in checks:
                tag = "PASS" if c["ok"] else "FAIL"
                print(f"[{tag}] {c['name']}: {c['detail']}")
            return 1 if failed else 0

        if args.command == "conformity":
            from .mesh import cube_mesh, two_tet_mesh
            ns = _parse_ns(parser, args.n, (2,))
            meshes = [("two-tet", two_tet_mesh())]
            meshes += [(f"cube N={n}", cube_mesh(n)) for n in ns]
            ok = True
            for name, mesh in meshes:
                _progress(f"conformity: {name}")
                wu, wc = X.conformity_report(mesh, bc_mode=args.bc_mode,
                                             quad_degree=args.quad_degree)
                good = wu <= 1e-7 and wc <= 1e-7
                ok = ok and good
                tag = "PASS" if good else "FAIL"
                print(f"[{tag}] {name}: u x nu jump {wu:.3e}, "
                      f"curl jump {wc:.3e}")
            return 0 if ok else 1
    except OddSubdivision as exc:
        parser.error(str(exc))
    return 2


if __name__ == "__main__":
    sys.exit(main())
