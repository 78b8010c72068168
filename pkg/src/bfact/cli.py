"""Command line interface: ``bfact {arch,gen,factorize,verify,bench}``.

Exit codes: 0 success, 1 verification or I/O failure, 2 usage or validation
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
import time
from contextlib import nullcontext

import numpy as np

from . import io as bio
from .butterfly import (FactorizationResult, balanced_permutation, butterfly_factorize, clr_check,
                        hierarchical_factorize, identity_permutation, random_permutation,
                        reverse_permutation)
from .kfactor import left_unitary_deviation, right_unitary_deviation
from .pattern import (Architecture, ArchitectureError, architecture_from_json, architecture_from_size,
                      architecture_to_json, enumerate_architectures, is_chainable, is_redundant,
                      low_rank, monarch, product_pattern, rank_vector, remove_redundancy,
                      square_dyadic)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared option groups

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _add_arch_options(p: argparse.ArgumentParser):
    g = p.add_argument_group("architecture (pick one)")
    g.add_argument("--arch", metavar="FILE", help='JSON file {"patterns": [[a,b,c,d], ...]}')
    g.add_argument("--square-dyadic", type=int, metavar="L")
    g.add_argument("--monarch", type=int, nargs=4, metavar=("M", "N", "P", "Q"))
    g.add_argument("--low-rank", type=int, nargs=3, metavar=("M", "N", "R"))
    g.add_argument("--sizes", nargs=3, metavar=("P", "Q", "R"),
                   help="build from size factors, e.g. --sizes 2,2,2 2,2,2 1,1")
    g.add_argument("--preset", type=int, nargs=3, metavar=("N", "L", "R"),
                   help="smallest square-factor n x n architecture of depth L with all ranks R")


def _arch_from_args(args) -> Architecture | None:
    chosen = [k for k in ("arch", "square_dyadic", "monarch", "low_rank", "sizes", "preset")
              if getattr(args, k, None) is not None]
    if len(chosen) > 1:
        raise UsageError(f"give one architecture source, got {', '.join('--' + c.replace('_', '-') for c in chosen)}")
    if not chosen:
        return None
    kind = chosen[0]
    if kind == "arch":
        try:
            with open(args.arch) as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read architecture file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.arch}: invalid JSON ({exc})") from exc
        return architecture_from_json(obj)
    if kind == "square_dyadic":
        return square_dyadic(args.square_dyadic)
    if kind == "monarch":
        return monarch(*args.monarch)
    if kind == "low_rank":
        return low_rank(*args.low_rank)
    if kind == "sizes":
        p, q, r = (_int_list(x) for x in args.sizes)
        return architecture_from_size(p, q, r)[0]
    n, L, r = args.preset
    return preset_architecture(n, L, r)


def _require_arch(args) -> Architecture:
    arch = _arch_from_args(args)
    if arch is None:
        raise UsageError("an architecture is required (--arch, --square-dyadic, --monarch, --low-rank, --sizes or --preset)")
    return arch


def preset_architecture(n: int, L: int, r: int) -> Architecture:
    """Smallest square-factor architecture with dense product and ranks ``(r, ..., r)``."""
    found = enumerate_architectures(n, n, L, ranks=(r,) * (L - 1), square=True)
    if not found:
        raise ArchitectureError(f"no non-redundant square-factor architecture for n={n}, L={L}, r={r}")
    return found[0]["arch"]


def _sigma(spec: str, L: int, seed: int) -> tuple[int, ...]:
    if spec == "identity":
        return identity_permutation(L)
    if spec == "reverse":
        return reverse_permutation(L)
    if spec == "balanced":
        return balanced_permutation(L)
    if spec == "random":
        return random_permutation(L, bio.make_rng(seed))
    sigma = tuple(_int_list(spec))
    if sorted(sigma) != list(range(1, L)):
        raise UsageError(f"--sigma {spec} is not a permutation of 1..{L - 1}")
    return sigma


_FLAT_LIST = re.compile(r'\[[^\[\]{}"]*\]')


def _emit(obj, out: str | None):
    # indented objects, but lists of numbers on one line
    text = _FLAT_LIST.sub(lambda m: " ".join(m.group(0).split()).replace("[ ", "[").replace(" ]", "]"),
                          json.dumps(obj, indent=1))
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _threads(n: int | None):
    if n is None:
        env = os.environ.get("BFACT_THREADS")
        n = int(env) if env else None
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


# ---------------------------------------------------------------------------
# arch

def cmd_arch(args) -> int:
    if args.action == "from-size":
        if not (args.p and args.q):
            raise UsageError("from-size needs --p and --q")
        arch, ok = architecture_from_size(args.p, args.q, args.r or [])
        _emit({"architecture": architecture_to_json(arch), "non_redundant": ok}, args.out)
        return 0
    if args.action == "enumerate":
        if None in (args.m, args.n, args.L):
            raise UsageError("enumerate needs --m, --n and --L")
        found = enumerate_architectures(args.m, args.n, args.L, ranks=args.ranks, square=args.square,
                                        max_rank=args.max_rank)
        if args.limit:
            found = found[:args.limit]
        _emit([{"patterns": e["arch"].as_lists(), "p": list(e["p"]), "q": list(e["q"]),
                "r": list(e["r"]), "nnz": e["nnz"]} for e in found], args.out)
        return 0
    arch = _require_arch(args)
    if args.action == "check":
        info = {"patterns": arch.as_lists(), "shape": list(arch.shape), "nnz": arch.nnz,
                "chainable": is_chainable(arch)}
        if info["chainable"]:
            info.update(ranks=rank_vector(arch), redundant=is_redundant(arch),
                        product_pattern=list(product_pattern(arch).as_tuple()))
        else:
            try:
                rank_vector(arch)
            except ArchitectureError as exc:
                info["reason"] = str(exc)
        _emit(info, args.out)
        return 0
    reduced, trace = remove_redundancy(arch)
    _emit({"reduced": architecture_to_json(reduced), "nnz_before": arch.nnz, "nnz_after": reduced.nnz,
           "trace": [{"index": t.index, "left": list(t.left.as_tuple()), "right": list(t.right.as_tuple())}
                     for t in trace]}, args.out)
    return 0


# ---------------------------------------------------------------------------
# gen

def _clean_path(out: str) -> str:
    root, ext = os.path.splitext(out)
    return f"{root}.clean{ext}"


def cmd_gen(args) -> int:
    if args.kind == "hadamard":
        if args.n is None:
            raise UsageError("hadamard needs --n")
        try:
            A = bio.hadamard(args.n)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        bio.write_matrix(args.out, A, args.format)
        return 0
    arch = _require_arch(args)
    rank_vector(arch)
    rng = bio.make_rng(args.seed)
    if args.kind == "random-butterfly":
        bio.write_matrix(args.out, bio.random_butterfly_matrix(arch, rng, args.dist), args.format)
        return 0
    A, clean = bio.noisy_butterfly_matrix(arch, args.eps, rng)
    bio.write_matrix(args.out, A, args.format)
    bio.write_matrix(args.clean or _clean_path(args.out), clean, args.format)
    return 0


# ---------------------------------------------------------------------------
# factorize

def _load(path, fmt=None) -> np.ndarray:
    try:
        return bio.read_matrix(path, fmt)
    except OSError as exc:
        raise OSError(f"cannot read matrix: {exc}") from exc


def cmd_factorize(args) -> int:
    arch = _require_arch(args)
    A = _load(args.matrix, args.format)
    rank_vector(arch)
    sigma = _sigma(args.sigma, len(arch), args.seed)
    t0 = time.perf_counter()
    if args.algorithm == "recursive":
        res = hierarchical_factorize(A, arch, sigma, with_bounds=not args.no_bounds)
    else:
        res = butterfly_factorize(A, arch, sigma, orthonormalize=not args.no_ortho,
                                  with_bounds=not args.no_bounds)
    elapsed = time.perf_counter() - t0
    _emit(res.to_json("plain" if args.plain else "base64"), args.out)
    if args.emit_dense:
        bio.write_matrix(args.emit_dense, res.to_dense())
    summary = (f"rel_error={res.relative_error:.6e} abs_error={res.abs_error:.6e} "
               f"L={len(arch)} ortho={res.ortho} sigma={','.join(map(str, res.sigma))} time_s={elapsed:.4f}")
    print(summary, file=sys.stdout if args.out else sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# verify

def cmd_verify(args) -> int:
    if args.check == "unitarity":
        with open(args.target) as fh:
            res = FactorizationResult.from_json(json.load(fh))
        ranks = rank_vector(res.arch)
        L = len(res.arch)
        if args.factors:
            idx = args.factors
        else:
            idx = list(range(1, L)) if args.side == "left" else list(range(2, L + 1))
        rows, ok = [], True
        for i in idx:
            if not 1 <= i <= L:
                raise UsageError(f"factor index {i} outside 1..{L}")
            if args.side == "left":
                if i == L:
                    raise UsageError("the last factor has no right neighbour for left-unitarity")
                dev = left_unitary_deviation(res.factors[i - 1], ranks[i - 1])
                r = ranks[i - 1]
            else:
                if i == 1:
                    raise UsageError("the first factor has no left neighbour for right-unitarity")
                dev = right_unitary_deviation(res.factors[i - 1], ranks[i - 2])
                r = ranks[i - 2]
            passed = dev <= args.tol
            ok &= passed
            rows.append({"factor": i, "side": args.side, "r": r, "gram_deviation": dev, "ok": passed})
        _emit({"passed": ok, "checks": rows}, args.out)
        return 0 if ok else 1

    arch = _require_arch(args)
    A = _load(args.target, args.format)
    if args.check == "clr":
        report = clr_check(A, arch, args.tol)
        _emit(report.to_json(), args.out)
        return 0 if report.passed else 1

    L = len(arch)
    norm = float(np.linalg.norm(A))
    pad = args.slack * norm
    rows, ok = [], True
    for name in ("identity", "reverse", "balanced", "random"):
        sigma = _sigma(name, L, args.seed)
        res = butterfly_factorize(A, arch, sigma, with_bounds=True)
        sum_ok = res.abs_error <= res.bound_sum + pad
        row = {"sigma_name": name, "sigma": list(sigma), "abs_error": res.abs_error,
               "bound_sum": res.bound_sum, "sum_ok": sum_ok}
        if name in ("identity", "reverse"):
            row["bound_pyth"] = res.bound_pyth
            row["pyth_ok"] = res.abs_error ** 2 <= res.bound_pyth ** 2 + args.slack * norm ** 2
            sum_ok = sum_ok and row["pyth_ok"]
        ok &= sum_ok
        rows.append(row)
    _emit({"passed": ok, "norm": norm, "checks": rows}, args.out)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# bench

def _time_once(A, arch, sigma, ortho):
    t0 = time.perf_counter()
    res = butterfly_factorize(A, arch, sigma, orthonormalize=ortho)
    return res, time.perf_counter() - t0


def bench_scaling(sizes, L=4, r=4, eps=0.1, reps=10, seed=0):
    """Rows ``(n, variant, mean_err, std_err, mean_time_s)`` for ortho on and off."""
    rows = []
    for n in sizes:
        arch = preset_architecture(n, L, r)
        sigma = balanced_permutation(L)
        data = []
        for rep in range(reps):
            A, _ = bio.noisy_butterfly_matrix(arch, eps, bio.make_rng(seed + rep))
            data.append(A)
        _time_once(data[0], arch, sigma, True)  # warmup
        for variant, ortho in (("ortho", True), ("no-ortho", False)):
            errs, times = [], []
            for A in data:
                res, dt = _time_once(A, arch, sigma, ortho)
                errs.append(res.relative_error)
                times.append(dt)
            rows.append({"n": n, "variant": variant, "mean_err": float(np.mean(errs)),
                         "std_err": float(np.std(errs)), "mean_time_s": float(np.mean(times))})
    return rows


def bench_permutations(n=1152, L=5, r=4, eps_grid=(0.01, 0.1, 1.0), reps=3, seed=0):
    """Error and both bounds per permutation, averaged over repetitions."""
    arch = preset_architecture(n, L, r)
    perms = {"identity": identity_permutation(L), "balanced": balanced_permutation(L),
             "random": random_permutation(L, bio.make_rng(seed))}
    rows = []
    for eps in eps_grid:
        acc = {name: [] for name in perms}
        for rep in range(reps):
            A, _ = bio.noisy_butterfly_matrix(arch, eps, bio.make_rng(seed + rep))
            norm = np.linalg.norm(A)
            for name, sigma in perms.items():
                res = butterfly_factorize(A, arch, sigma, with_bounds=True)
                acc[name].append((res.abs_error / norm, res.bound_sum / norm, res.bound_pyth / norm))
        for name, vals in acc.items():
            v = np.asarray(vals)
            bound = v[:, 2] if name == "identity" else v[:, 1]
            rows.append({"n": n, "eps": eps, "sigma_name": name, "sigma": " ".join(map(str, perms[name])),
                         "mean_rel_err": float(v[:, 0].mean()), "mean_bound_sum": float(v[:, 1].mean()),
                         "mean_bound_pyth": float(v[:, 2].mean()), "bound_used": float(bound.mean()),
                         "bound_holds": bool(np.all(v[:, 0] <= bound + 1e-8))})
    return rows


def _write_csv(rows, out):
    if not rows:
        return
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if out:
            fh.close()


def cmd_bench(args) -> int:
    if args.kind == "scaling":
        sizes = args.sizes or [2 ** i for i in range(7, 12)]
        rows = bench_scaling(sizes, args.L or 4, args.rank, args.eps, args.reps or 10, args.seed)
    else:
        rows = bench_permutations(args.n, args.L or 5, args.rank, tuple(args.eps_grid), args.reps or 3, args.seed)
    _write_csv(rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bfact", description="Deformable butterfly factorization toolkit")
    ap.add_argument("--threads", type=int, default=None, help="cap BLAS/LAPACK threads (env BFACT_THREADS)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("arch", help="architecture tooling")
    p.add_argument("action", choices=["check", "reduce", "from-size", "enumerate"])
    _add_arch_options(p)
    p.add_argument("--p", type=_int_list)
    p.add_argument("--q", type=_int_list)
    p.add_argument("--r", type=_int_list)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--ranks", type=_int_list, help="fix r(beta) when enumerating")
    p.add_argument("--square", action="store_true", help="only architectures with square factors")
    p.add_argument("--max-rank", type=int)
    p.add_argument("--limit", type=int)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_arch)

    p = sub.add_parser("gen", help="write a test matrix")
    p.add_argument("kind", choices=["hadamard", "random-butterfly", "noisy"])
    _add_arch_options(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--dist", choices=["uniform", "normal"], default="uniform")
    p.add_argument("--clean", help="path for the noiseless matrix (noisy only)")
    p.add_argument("--format", choices=["bin", "csv"])
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("factorize", help="factorize a matrix file")
    p.add_argument("matrix")
    _add_arch_options(p)
    p.add_argument("--sigma", default="balanced", help="identity, reverse, balanced, random or e.g. 2,1,3")
    p.add_argument("--seed", type=int, default=0, help="seed for --sigma random")
    p.add_argument("--algorithm", choices=["unrolled", "recursive"], default="unrolled")
    p.add_argument("--no-ortho", action="store_true")
    p.add_argument("--no-bounds", action="store_true", help="skip split errors and bounds")
    p.add_argument("--plain", action="store_true", help="write factor values as plain numbers")
    p.add_argument("--emit-dense", metavar="FILE", help="write the reconstruction as a matrix file")
    p.add_argument("--format", choices=["bin", "csv"])
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("verify", help="check membership, bounds or unitarity")
    p.add_argument("check", choices=["clr", "bounds", "unitarity"])
    p.add_argument("target", help="matrix file (clr, bounds) or factorization JSON (unitarity)")
    _add_arch_options(p)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--slack", type=float, default=1e-8, help="relative padding of the bound checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--side", choices=["left", "right"], default="left")
    p.add_argument("--factors", type=_int_list, help="1-based factor indices to check")
    p.add_argument("--format", choices=["bin", "csv"])
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="reproduce the scaling and permutation experiments as CSV")
    p.add_argument("kind", choices=["scaling", "permutations"])
    p.add_argument("--sizes", type=_int_list)
    p.add_argument("--n", type=int, default=1152)
    p.add_argument("--L", type=int)
    p.add_argument("--rank", type=int, default=4)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--eps-grid", type=_float_list, default=[0.01, 0.1, 1.0])
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "tol", "absent") is None:
        args.tol = 1e-8 if args.check == "clr" else 1e-10
    try:
        with _threads(args.threads):
            return args.func(args)
    except UsageError as exc:
        print(f"bfact: error: {exc}", file=sys.stderr)
        return 2
    except (ArchitectureError, ValueError) as exc:
        print(f"bfact: invalid input: {exc}", file=sys.stderr)
        return 2
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"bfact: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
