"""Benchmark harness: deterministic inputs, timing, CSV output, verification.

Matrix generation uses SplitMix64 so that runs are reproducible bit for bit
across platforms and reimplementations; see the README for the exact
constants.  All diagnostics go to stderr, CSV rows go to stdout.  Exit
status is 1 when a requested verification fails and 2 on configuration
errors; everything else exits 0.
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings

import numpy as np

from .depgraph import analyze_overlap, build_dag, enumerate_tasks, to_dot
from .oracles import band_check, jacobi_eigen, jacobi_svd, spectra_match
from .runtime import ExecGroups
from .sevp import SevpConfig, SevpVariant, reduce_sym_band, sevp_nominal_flops
from .svd import SvdConfig, SvdForm, SvdVariant, reduce_band_svd, svd_nominal_flops

__all__ = [
    "gen_sym",
    "gen_general",
    "save_matrix",
    "load_matrix",
    "main",
]

CSV_HEADER = "algo,m,n,w,b,ts,tp,seconds,gflops,verify_max_dev,best"

_SEVP_VARIANTS = {
    "sevp-ref": SevpVariant.REFERENCE,
    "sevp-v1": SevpVariant.V1,
    "sevp-v2": SevpVariant.V2,
}
_SVD_VARIANTS = {
    "svd-ref": SvdVariant.REFERENCE,
    "svd-sim": SvdVariant.SIMULTANEOUS,
    "svd-v1": SvdVariant.V1,
    "svd-v2": SvdVariant.V2,
}
_ALGOS = ["sevp-ref", "sevp-v1", "sevp-v2", "svd-triband",
          "svd-ref", "svd-sim", "svd-v1", "svd-v2", "depgraph"]


def _splitmix64_unit(count: int, seed: int) -> np.ndarray:
    """count floats in (0, 1) from SplitMix64 streams seeded at ``seed``.

    Element i uses the state seed + (i+1) * 0x9E3779B97F4A7C15 mod 2^64 and
    the standard finalizer; the top 53 bits map to (0, 1) with a half-ulp
    offset so 0.0 is never produced.
    """
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53 + 2.0 ** -54


def gen_general(m: int, n: int, seed: int) -> np.ndarray:
    """m x n matrix with entries uniform in (0, 1), deterministic in seed.

    Values are assigned in column-major order so the same (m, n, seed)
    yields the same bits regardless of how the caller stores the result.
    """
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be positive")
    return _splitmix64_unit(m * n, seed).reshape((m, n), order="F")


def gen_sym(n: int, seed: int) -> np.ndarray:
    """Symmetric n x n matrix: (G + G^T) / 2 over the same stream as
    gen_general(n, n, seed)."""
    g = gen_general(n, n, seed)
    return np.asfortranarray((g + g.T) / 2.0)


def save_matrix(path: str, a: np.ndarray) -> None:
    """Plain-text dump: first line "rows cols", then column-major values,
    one per line, with 17 significant digits (value-exact on reload)."""
    a = np.asarray(a, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for v in a.flatten(order="F"):
            fh.write(f"{v:.16e}\n")


def load_matrix(path: str) -> np.ndarray:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 2:
            raise ValueError(f"{path}: first line must be 'rows cols'")
        m, n = int(head[0]), int(head[1])
        vals = np.loadtxt(fh, dtype=np.float64).reshape(-1)
    if vals.size != m * n:
        raise ValueError(f"{path}: expected {m * n} values, found {vals.size}")
    return vals.reshape((m, n), order="F")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bandred-bench",
        description="Benchmark the band reduction variants and analyze "
                    "their look-ahead dependencies.")
    p.add_argument("--algo", required=True, choices=_ALGOS)
    p.add_argument("--n", type=int, help="column dimension (rows too for SEVP)")
    p.add_argument("--m", type=int,
                   help="row dimension, SVD algos only (default: n)")
    p.add_argument("--w", type=int, default=16, help="target bandwidth")
    p.add_argument("--b", type=int, help="block size (default: 16 capped to "
                                         "the variant's legal range)")
    p.add_argument("--b-sweep", action="store_true",
                   help="time every block size in a range, flag the best")
    p.add_argument("--b-start", type=int, default=16)
    p.add_argument("--b-end", type=int,
                   help="default: w, or w/2 for V1 variants")
    p.add_argument("--b-step", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="total workers")
    p.add_argument("--ts", type=int, default=1,
                   help="workers in the sequential group (0: no look-ahead)")
    p.add_argument("--verify", action="store_true",
                   help="check spectrum/singular values against the Jacobi "
                        "oracles and the band profile; failures exit 1")
    p.add_argument("--dump", metavar="FILE", help="write the input matrix")
    p.add_argument("--load", metavar="FILE",
                   help="read the input matrix instead of generating it")
    p.add_argument("--trace", metavar="FILE", help="write the event trace")
    p.add_argument("--dot", metavar="FILE",
                   help="write the dependency DAG (depgraph only)")
    p.add_argument("--form", choices=["triband", "band"], default="triband",
                   help="reduction form analyzed by depgraph")
    p.add_argument("--ratio", type=int, default=1,
                   help="depgraph bandwidth ratio: w = ratio * b")
    return p


def _legal_blocks(args, parser) -> list[int]:
    v1 = args.algo in ("sevp-v1", "svd-v1")
    if args.b_sweep:
        if args.b is not None:
            parser.error("--b and --b-sweep are mutually exclusive")
        cap = args.w // 2 if v1 else args.w
        end = args.b_end if args.b_end is not None else max(1, cap)
        if args.b_start < 1 or args.b_step < 1:
            parser.error("--b-start and --b-step must be positive")
        blocks = list(range(args.b_start, end + 1, args.b_step))
        if not blocks:
            parser.error(f"empty block sweep: start {args.b_start} "
                         f"end {end} step {args.b_step}")
        return blocks
    if args.b is not None:
        return [args.b]
    cap = args.w // 2 if v1 else args.w
    return [max(1, min(16, cap))]


def _verify_sevp(a_in, band, w):
    ref = jacobi_eigen(a_in)
    got = jacobi_eigen(band)
    scale = max(float(np.max(np.abs(ref))), np.finfo(np.float64).tiny)
    ok, dev = spectra_match(ref, got, 1e-11 * scale)
    off = band_check(band, w, w)
    return ok and off == 0.0, dev


def _verify_svd(a_in, result):
    ref = jacobi_svd(a_in)
    got = jacobi_svd(result.band)
    scale = max(float(ref[0]) if ref.size else 0.0, np.finfo(np.float64).tiny)
    ok, dev = spectra_match(ref, got, 1e-11 * scale)
    off = band_check(result.band, result.lower_bw, result.upper_bw)
    return ok and off == 0.0, dev


def _emit(row: list[str]) -> None:
    print(",".join(row), flush=True)


def _run_bench(args, parser) -> int:
    is_sevp = args.algo.startswith("sevp")
    if args.load:
        a_in = load_matrix(args.load)
        m, n = a_in.shape
        if is_sevp and m != n:
            parser.error(f"{args.algo} needs a square matrix, "
                         f"loaded {m}x{n}")
    else:
        if args.n is None:
            parser.error("--n is required unless --load is given")
        if args.n < 1:
            parser.error("--n must be positive")
        n = args.n
        m = args.m if (args.m is not None and not is_sevp) else n
        if m < 1:
            parser.error("--m must be positive")
        a_in = gen_sym(n, args.seed) if is_sevp else gen_general(m, n, args.seed)
    if args.dump:
        save_matrix(args.dump, a_in)
    if args.w < 1:
        parser.error("--w must be positive")
    if args.threads < 1:
        parser.error("--threads must be positive")
    if not 0 <= args.ts <= args.threads:
        parser.error("--ts must lie in [0, threads]")
    if args.verify:
        if is_sevp and n > 256:
            parser.error("--verify supports n <= 256 for SEVP (oracle scale)")
        if not is_sevp and min(m, n) > 128:
            parser.error("--verify supports min(m, n) <= 128 for SVD")

    blocks = _legal_blocks(args, parser)
    configs = []
    for b in blocks:
        try:
            if is_sevp:
                cfg = SevpConfig(n=n, w=args.w, b=b,
                                 variant=_SEVP_VARIANTS[args.algo])
            elif args.algo == "svd-triband":
                cfg = SvdConfig(m=m, n=n, w=args.w, b=b,
                                form=SvdForm.TRIANGULAR_BAND)
            else:
                cfg = SvdConfig(m=m, n=n, w=args.w, b=b,
                                variant=_SVD_VARIANTS[args.algo])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                cfg.validate()
        except ValueError as exc:
            parser.error(str(exc))
        configs.append(cfg)

    print(CSV_HEADER, flush=True)
    # m < n runs through the transpose, so charge the transposed problem
    nominal = (sevp_nominal_flops(n) if is_sevp
               else svd_nominal_flops(max(m, n), min(m, n)))
    failed = False
    best_row, best_gf = None, -1.0
    with ExecGroups(args.threads, args.ts) as groups:
        for cfg in configs:
            t0 = time.perf_counter()
            if is_sevp:
                res = reduce_sym_band(a_in, cfg, groups)
            else:
                res = reduce_band_svd(a_in, cfg, groups)
            secs = time.perf_counter() - t0
            gf = nominal / secs / 1e9
            dev_txt = ""
            if args.verify:
                ok, dev = (_verify_sevp(a_in, res.band, args.w) if is_sevp
                           else _verify_svd(a_in, res))
                dev_txt = repr(dev)
                if not ok:
                    failed = True
                    print(f"verify FAILED: {args.algo} m={m} n={n} "
                          f"w={args.w} b={cfg.b} max_dev={dev}",
                          file=sys.stderr)
            row = [args.algo, str(m), str(n), str(args.w), str(cfg.b),
                   str(groups.ts_count), str(groups.tp_count),
                   repr(secs), repr(gf), dev_txt, ""]
            _emit(row)
            if args.b_sweep and gf > best_gf:
                best_gf, best_row = gf, row
        if args.b_sweep and best_row is not None:
            _emit(best_row[:-1] + ["1"])
        if args.trace:
            groups.trace.dump(args.trace)
    return 1 if failed else 0


def _run_depgraph(args, parser) -> int:
    if args.ratio < 1:
        parser.error("--ratio must be at least 1")
    b = args.b if args.b is not None else 2
    if b < 1:
        parser.error("--b must be positive")
    w = args.ratio * b
    n = args.n if args.n is not None else 24
    m = args.m if args.m is not None else n
    form = SvdForm.TRIANGULAR_BAND if args.form == "triband" else SvdForm.BAND
    try:
        tasks = enumerate_tasks(m, n, w, b, form)
        dag = build_dag(tasks, m, n, w, b, form)
        report = analyze_overlap(dag, w, b, form)
    except ValueError as exc:
        parser.error(str(exc))
    print(f"form={args.form} m={m} n={n} w={w} b={b} "
          f"tasks={len(dag.nodes)} edges={len(dag.edges)} "
          f"steady={len(report.steady_iterations)} "
          f"left={report.left_feasible} right={report.right_feasible} "
          f"both={report.both_feasible}", file=sys.stderr)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(to_dot(dag))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.algo == "depgraph":
        return _run_depgraph(args, parser)
    return _run_bench(args, parser)


if __name__ == "__main__":
    sys.exit(main())
