"""Command-line front end.

Exit status is 0 on success, 1 when an input fails validation and 2 on
usage errors. Numbers are written with full double precision.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import warnings
from contextlib import contextmanager
from typing import Sequence

import numpy as np

from .embedding import check_wald_matrix, contract_toward_infinity, phi, recognize
from .errors import WaldError
from .forest import Split, Wald, random_wald, resolved_topologies
from .geodesic import GeodesicParams, geodesic_path, wald_distance
from .geometry import GroveChart, curvature_extremes
from .newick import (
    dumps_wald,
    lengths_to_weights,
    loads_wald,
    wald_from_document,
    wald_to_document,
    wald_to_newick,
    weights_to_lengths,
)
from .stats import (
    FrechetSearch,
    Sample,
    SymmetricFamily,
    frechet_heatmap,
    frechet_mean,
    one_split_triangle,
    stickiness_cases,
    triangle_angles,
)


class UsageError(Exception):
    """Arguments parse but do not make sense together."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(x: float) -> str:
    return repr(float(x))


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


@contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _read_matrix(path: str) -> np.ndarray:
    text = _read_text(path)
    try:
        if text.lstrip().startswith("["):
            m = np.array(json.loads(text), dtype=float)
        else:
            m = np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise WaldError(f"cannot read matrix: {exc}") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise WaldError(f"expected a square matrix, got shape {m.shape}")
    return m


def _write_matrix(m: np.ndarray, out) -> None:
    for row in m:
        out.write(",".join(_num(x) for x in row) + "\n")


def _read_sample(path: str) -> Sample:
    text = _read_text(path)
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return Sample(tuple(wald_from_document(d) for d in doc["walds"]))
    return Sample(tuple(loads_wald(line) for line in text.splitlines() if line.strip()))


def _write_forest(w: Wald, fmt: str, out) -> None:
    if fmt == "newick":
        out.write(wald_to_newick(w) + "\n")
    else:
        out.write(dumps_wald(w) + "\n")


def _sweep(text: str) -> np.ndarray:
    try:
        a0, a1, steps = text.split(":")
        values = np.linspace(float(a0), float(a1), int(steps))
    except ValueError as exc:
        raise UsageError(f"sweep must look like start:stop:count, got {text!r}") from exc
    if len(values) < 1:
        raise UsageError("a sweep needs at least one value")
    return values


def _grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"grid must be comma-separated numbers, got {text!r}") from exc


def _params(args) -> GeodesicParams:
    return GeodesicParams(args.n0, args.i_ext, args.j_straight, args.tol, args.max_iter, not args.one_way)


def _add_geodesic_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n0", type=int, default=5, help="initial odd number of path points")
    p.add_argument("--i-ext", type=int, default=4, help="midpoint extension rounds")
    p.add_argument("--j-straight", type=int, default=10, help="straightening sweeps per extension")
    p.add_argument("--tol", type=float, default=1e-8, help="projection gradient tolerance")
    p.add_argument("--max-iter", type=int, default=500, help="projection iteration cap")
    p.add_argument("--one-way", action="store_true", help="compute distances in one direction only")


# ------------------------------------------------------------------ commands


def cmd_validate(args) -> int:
    report = check_wald_matrix(_read_matrix(args.matrix))
    with _output(args.output) as out:
        if report.ok:
            out.write("ok\n")
        for v in report.violations:
            witness = " ".join(str(i) for i in v.witness)
            out.write(f"{v.condition}\twitness={witness}\texcess={_num(v.excess)}\tcount={v.count}\n")
    return 0 if report.ok else 1


def cmd_recognize(args) -> int:
    w = recognize(_read_matrix(args.matrix))
    with _output(args.output) as out:
        _write_forest(w, args.format, out)
    return 0


def cmd_embed(args) -> int:
    w = loads_wald(_read_text(args.forest))
    with _output(args.output) as out:
        _write_matrix(phi(w), out)
    return 0


def cmd_convert(args) -> int:
    with _output(args.output) as out:
        if args.length is not None:
            out.write(_num(lengths_to_weights(args.length)) + "\n")
        elif args.weight is not None:
            out.write(_num(weights_to_lengths(args.weight)) + "\n")
        elif args.forest is not None:
            _write_forest(loads_wald(_read_text(args.forest)), args.to, out)
        else:
            raise UsageError("convert needs a forest file, --length or --weight")
    return 0


def cmd_geodesic(args) -> int:
    f1 = loads_wald(_read_text(args.first))
    f2 = loads_wald(_read_text(args.second))
    path = geodesic_path(f1, f2, args.n0, args.i_ext, args.j_straight, tol=args.tol, max_iter=args.max_iter)
    splits = sorted({s for w in path.points for s in w.weights})
    with _output(args.output) as out:
        out.write(f"# energy={_num(path.energy)}\n# length={_num(path.length)}\n")
        if path.flagged:
            out.write("# unconverged=" + ",".join(str(i) for i in path.flagged) + "\n")
        out.write("index," + ",".join(str(s) for s in splits) + "\n")
        for i, w in enumerate(path.points):
            out.write(f"{i}," + ",".join(_num(w.weight(s)) for s in splits) + "\n")
    return 0


def cmd_distance(args) -> int:
    f1 = loads_wald(_read_text(args.first))
    f2 = loads_wald(_read_text(args.second))
    with _output(args.output) as out:
        out.write(_num(wald_distance(f1, f2, _params(args))) + "\n")
    return 0


def cmd_curvature(args) -> int:
    topology = resolved_topologies(args.n_leaves)[0]
    with _output(args.output) as out:
        out.write("a,k_min,k_max\n")
        for a in _sweep(args.sweep):
            if not 0.0 < a < 1.0:
                raise UsageError(f"curvature sweep values must lie in (0, 1), got {a}")
            chart = GroveChart(topology, np.full(len(topology.ordered), a))
            k_min, k_max = curvature_extremes(chart, args.planes, args.seed)
            out.write(f"{_num(a)},{_num(k_min)},{_num(k_max)}\n")
    return 0


def cmd_triangle(args) -> int:
    params = _params(args)
    with _output(args.output) as out:
        out.write("lambda_e,angle_sum_degrees,angle_sum_second_point\n")
        for lam in _sweep(args.sweep):
            r = triangle_angles(*one_split_triangle(lam), params)
            out.write(f"{_num(lam)},{_num(r.total)},{_num(r.total_second)}\n")
    return 0


def cmd_frechet_mean(args) -> int:
    if args.case:
        cases = stickiness_cases(args.workers)
        if args.case not in cases:
            raise UsageError(f"unknown recorded case {args.case!r}; choose from {sorted(cases)}")
        case = cases[args.case]
        sample, search = case.sample, case.search
    else:
        if args.sample is None:
            raise UsageError("frechet-mean needs a sample file or --case")
        sample = _read_sample(args.sample)
        inner = [Split.parse(x) for x in args.inner_split]
        search = FrechetSearch(
            SymmetricFamily.with_inner(sample.n_leaves, inner),
            _grid(args.pendant_grid),
            _grid(args.inner_grid),
            _params(args),
            refine=not args.no_refine,
            max_evals=args.max_evals,
            workers=args.workers,
        )
    if args.heatmap_only:
        grid = frechet_heatmap(sample, search)
        result = None
    else:
        result = frechet_mean(sample, search)
        grid = result.grid
    if args.heatmap:
        with _output(args.heatmap) as out:
            out.write("lambda_pen,lambda_int,frechet_value\n")
            for a, b, v in grid:
                out.write(f"{_num(a)},{_num(b)},{_num(v)}\n")
    if result is not None:
        with _output(args.output) as out:
            doc = {
                "pendant": result.pendant,
                "inner": result.inner,
                "value": result.value,
                "sticky": result.sticky,
                "resolution": search.resolution,
                "wald": wald_to_document(result.wald),
            }
            out.write(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_contract(args) -> int:
    w = contract_toward_infinity(loads_wald(_read_text(args.forest)), args.x)
    with _output(args.output) as out:
        _write_forest(w, args.format, out)
    return 0


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    walds = [random_wald(rng, args.n_leaves) for _ in range(args.count)]
    with _output(args.output) as out:
        if args.format == "newick":
            for w in walds:
                out.write(wald_to_newick(w) + "\n")
        else:
            out.write(json.dumps({"walds": [wald_to_document(w) for w in walds]}, indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="waldspace", description="Wald space of phylogenetic forests.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("-o", "--output", help="output file (default: standard output)")
        return p

    p = command("validate", cmd_validate, "check the defining conditions of an embedded wald")
    p.add_argument("matrix", help="CSV or JSON matrix, '-' for standard input")

    p = command("recognize", cmd_recognize, "recover the forest behind a matrix")
    p.add_argument("matrix")
    p.add_argument("--format", choices=("json", "newick"), default="json")

    p = command("embed", cmd_embed, "matrix of a forest")
    p.add_argument("forest", help="JSON document or Newick text")

    p = command("convert", cmd_convert, "convert forests between formats, or lengths and weights")
    p.add_argument("forest", nargs="?")
    p.add_argument("--to", choices=("json", "newick"), default="json")
    p.add_argument("--length", type=float, help="branch length to convert into an edge weight")
    p.add_argument("--weight", type=float, help="edge weight to convert into a branch length")

    p = command("geodesic", cmd_geodesic, "approximate geodesic as a CSV of edge weights")
    p.add_argument("first")
    p.add_argument("second")
    _add_geodesic_flags(p)

    p = command("distance", cmd_distance, "approximate wald distance")
    p.add_argument("first")
    p.add_argument("second")
    _add_geodesic_flags(p)

    p = command("curvature", cmd_curvature, "sectional curvature extremes at equal edge weights")
    p.add_argument("--sweep", required=True, help="start:stop:count of the common edge weight")
    p.add_argument("--n-leaves", type=int, default=3)
    p.add_argument("--planes", type=int, default=500, help="random planes per point")
    p.add_argument("--seed", type=int, default=0)

    p = command("triangle", cmd_triangle, "angle sums of the one-split triangle family")
    p.add_argument("--sweep", required=True, help="start:stop:count of the edge weight")
    _add_geodesic_flags(p)

    p = command("frechet-mean", cmd_frechet_mean, "Fréchet mean within a symmetric family")
    p.add_argument("sample", nargs="?", help="JSON {'walds': [...]} or one forest per line")
    p.add_argument("--case", help="use a recorded stickiness configuration instead of a sample file")
    p.add_argument("--inner-split", action="append", default=[], help="interior split of the family, e.g. 12|34")
    p.add_argument("--pendant-grid", default="0.1,0.3,0.5,0.7,0.9")
    p.add_argument("--inner-grid", default="0,0.05,0.1,0.2,0.3")
    p.add_argument("--max-evals", type=int, default=60)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--heatmap", help="write the grid values as CSV")
    p.add_argument("--heatmap-only", action="store_true", help="skip the minimization")
    p.add_argument("--workers", type=int, default=1)
    _add_geodesic_flags(p)

    p = command("contract", cmd_contract, "move a forest toward the all-isolated forest")
    p.add_argument("forest")
    p.add_argument("--x", type=float, required=True, help="contraction parameter in [0, 1]")
    p.add_argument("--format", choices=("json", "newick"), default="json")

    p = command("gen", cmd_gen, "seeded random forests")
    p.add_argument("--n-leaves", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "newick"), default="json")

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (WaldError, json.JSONDecodeError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
