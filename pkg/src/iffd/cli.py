"""Command-line front end: single solves, table sweeps, spectrum dumps.

Subcommands: ``solve`` (one problem, one result row), ``bench`` (iteration
count tables over a fixed grid), ``spectrum`` (per-frequency diagonal data of
one direction), ``selftest`` (transform and orthogonality checks).
Exit codes: 0 success, 1 invariant/verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import assembly as asm
from . import spectral, transforms
from .assembly import SingularGeometryError
from .solver import TensorPreconditioner, pcg, splitmix64_uniform
from .splines import DirichletSet, SplineSpace
from .splitting import UnsupportedSizeError

DOMAINS = {
    "square": ("square", 2),
    "cube": ("cube", 3),
    "annulus2d": ("quarter_annulus_2d", 2),
    "annulus3d": ("thick_quarter_annulus_3d", 3),
}
IDENTITY_DOMAINS = ("square", "cube")
CSV_HEADER = "domain,dim,n,p,precond,iters,relres,setup_ms,solve_ms,seed"


class UsageError(ValueError):
    """Bad flag or configuration value (exit code 2)."""


class VerificationError(RuntimeError):
    """A self-check or --verify comparison failed (exit code 1)."""


@dataclass(frozen=True)
class RunConfig:
    """One solver run, parseable from flags and from a key=value file."""

    domain: str = "square"
    n: tuple[int, ...] = (16,)
    p: int = 2
    bc: tuple[str, ...] = ("dd",)
    precond: str = "iffd"
    tol: float = 1e-8
    max_iters: int = 500
    seed: int = 1
    c0_knots: tuple[int, ...] = ()
    out: str = ""
    format: str = "csv"

    @property
    def dim(self) -> int:
        return DOMAINS[self.domain][1]

    def per_direction(self) -> tuple[tuple[int, ...], tuple[str, ...]]:
        """Broadcast n and bc to one entry per direction."""
        d = self.dim
        ns = self.n if len(self.n) == d else self.n * d
        bcs = self.bc if len(self.bc) == d else self.bc * d
        if len(ns) != d or len(bcs) != d:
            raise UsageError(f"need 1 or {d} values for n/bc, got n={self.n} bc={self.bc}")
        return ns, bcs

    def validate(self) -> "RunConfig":
        if self.domain not in DOMAINS:
            raise UsageError(f"unknown domain {self.domain!r}; choose from {sorted(DOMAINS)}")
        if self.precond not in ("none", "fd", "iffd"):
            raise UsageError(f"precond must be none/fd/iffd, got {self.precond!r}")
        if self.format not in ("csv", "md"):
            raise UsageError(f"format must be csv or md, got {self.format!r}")
        if self.tol <= 0:
            raise UsageError("tol must be positive")
        if self.max_iters < 1:
            raise UsageError("max-iters must be at least 1")
        ns, bcs = self.per_direction()
        for tok in bcs:
            DirichletSet.from_token(tok)
        for nn in ns:
            if nn < 1:
                raise UsageError(f"n must be positive, got {nn}")
        for k in self.c0_knots:
            if not 1 <= k <= ns[0] - 1:
                raise UsageError(f"c0 knot index {k} outside 1..{ns[0] - 1}")
        return self


def _fmt_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def render_config(cfg: RunConfig) -> str:
    """Config-file text; parse_config inverts this exactly."""
    lines = [f"{f.name} = {_fmt_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(t) for t in text.split(","))


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines (UTF-8, # comments) into a RunConfig."""
    kwargs = {}
    known = {f.name: f for f in fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        try:
            if key in ("n", "c0_knots"):
                kwargs[key] = _parse_int_tuple(value)
            elif key == "bc":
                kwargs[key] = tuple(t.strip() for t in value.split(","))
            elif key in ("p", "max_iters", "seed"):
                kwargs[key] = int(value)
            elif key == "tol":
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError as exc:
            raise UsageError(f"config line {lineno}: {exc}") from None
    return RunConfig(**kwargs).validate()


@dataclass
class BenchRow:
    """One CSV/markdown result line of a solve."""

    domain: str
    dim: int
    n: int
    p: int
    precond: str
    iters: int
    relres: float
    setup_ms: float
    solve_ms: float
    seed: int

    def csv(self) -> str:
        return (f"{self.domain},{self.dim},{self.n},{self.p},{self.precond},"
                f"{self.iters},{self.relres:.3e},{self.setup_ms:.1f},"
                f"{self.solve_ms:.1f},{self.seed}")


def build_problem(cfg: RunConfig):
    """Spaces, boundary sets and operator for one configuration."""
    ns, bcs = cfg.per_direction()
    spaces, Ds = [], []
    for k in range(cfg.dim):
        mults = tuple((kk, cfg.p) for kk in cfg.c0_knots) if k == 0 else ()
        spaces.append(SplineSpace(cfg.p, ns[k], mults))
        Ds.append(DirichletSet.from_token(bcs[k]))
    geom = asm.builtin_geometry(DOMAINS[cfg.domain][0])
    if cfg.domain in IDENTITY_DOMAINS:
        A = asm.kron_surrogate(spaces, Ds)
    else:
        A = asm.assemble_stiffness(geom, spaces, Ds)
    return spaces, Ds, geom, A


def build_preconditioner(cfg: RunConfig, spaces, Ds):
    dims = [asm.univariate_mass(s, D).m for s, D in zip(spaces, Ds)]
    if cfg.precond == "none":
        return TensorPreconditioner.none(dims)
    Ms = [asm.univariate_mass(s, D) for s, D in zip(spaces, Ds)]
    Ks = [asm.univariate_stiffness(s, D) for s, D in zip(spaces, Ds)]
    if cfg.precond == "fd":
        return TensorPreconditioner.fd(Ms, Ks)
    specs = [spectral.build_univariate_spectral(s, D, M, K)
             for s, D, M, K in zip(spaces, Ds, Ms, Ks)]
    return TensorPreconditioner.iffd(specs)


def run_solve(cfg: RunConfig):
    """Assembly -> splitting -> spectral -> PCG; returns (row, solution, A)."""
    cfg = cfg.validate()
    t0 = time.perf_counter()
    spaces, Ds, _geom, A = build_problem(cfg)
    P = build_preconditioner(cfg, spaces, Ds)
    setup_s = time.perf_counter() - t0
    ndof = A.shape[0]
    b = splitmix64_uniform(cfg.seed, ndof)
    x, report = pcg(A, b, P, tol=cfg.tol, max_iters=cfg.max_iters)
    report.setup_seconds = setup_s
    report.seed = cfg.seed
    ns, _ = cfg.per_direction()
    row = BenchRow(domain=cfg.domain, dim=cfg.dim, n=ns[0], p=cfg.p,
                   precond=cfg.precond, iters=report.iterations,
                   relres=report.residuals[-1] if report.residuals else 0.0,
                   setup_ms=setup_s * 1e3, solve_ms=report.solve_seconds * 1e3,
                   seed=cfg.seed)
    return row, x, report


# ---------------------------------------------------------------------------
# bench tables

BENCH_TABLES = {
    "square": dict(domain="square", ns=(64, 128, 256), ps=(2, 3, 4, 5, 6, 7),
                   bc=("dd", "dd"), variants=("iffd",), c0=False),
    "cube": dict(domain="cube", ns=(16, 32), ps=(2, 3, 4, 5),
                 bc=("dn", "nd", "nn"), variants=("iffd",), c0=False),
    "annulus3d": dict(domain="annulus3d", ns=(16, 32), ps=(2, 3, 4, 5),
                      bc=("nn", "nn", "dn"), variants=("fd", "iffd"), c0=False),
    "c0square": dict(domain="square", ns=(64, 128, 256), ps=(2, 3, 4, 5, 6, 7),
                     bc=("dd", "dd"), variants=("iffd",), c0=True),
}


def bench_rows(table_id: str, seed: int = 1) -> list[BenchRow]:
    spec_ = BENCH_TABLES[table_id]
    rows = []
    for n in spec_["ns"]:
        for p in spec_["ps"]:
            for variant in spec_["variants"]:
                cfg = RunConfig(domain=spec_["domain"], n=(n,), p=p,
                                bc=spec_["bc"], precond=variant, seed=seed,
                                c0_knots=(n // 2,) if spec_["c0"] else ())
                row, _, _ = run_solve(cfg)
                rows.append(row)
    return rows


def rows_to_csv(rows) -> str:
    return "\n".join([CSV_HEADER] + [r.csv() for r in rows]) + "\n"


def rows_to_markdown(rows, table_id: str | None = None) -> str:
    """Iteration counts as a (n rows) x (p columns) GitHub table; paired
    variants render side by side as ``fd / iffd``."""
    ns = sorted({r.n for r in rows})
    ps = sorted({r.p for r in rows})
    variants = sorted({r.precond for r in rows})
    cell: dict[tuple[int, int], dict[str, int]] = {}
    for r in rows:
        cell.setdefault((r.n, r.p), {})[r.precond] = r.iters
    title = f"### {table_id or rows[0].domain}: PCG iterations"
    if len(variants) > 1:
        title += f" ({' / '.join(variants)})"
    lines = [title, "", "| n | " + " | ".join(f"p={p}" for p in ps) + " |",
             "|---" * (len(ps) + 1) + "|"]
    for n in ns:
        entries = []
        for p in ps:
            got = cell.get((n, p), {})
            entries.append(" / ".join(str(got.get(v, "-")) for v in variants))
        lines.append(f"| {n} | " + " | ".join(entries) + " |")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# spectrum

SPECTRUM_HEADER = "j,alpha,d_tilde,lambda"


def spectrum_rows(cfg: RunConfig) -> tuple[str, spectral.UnivariateSpectral,
                                           asm.BandedMatrix, asm.BandedMatrix]:
    ns, bcs = cfg.per_direction()
    space = SplineSpace(cfg.p, ns[0],
                        tuple((k, cfg.p) for k in cfg.c0_knots))
    D = DirichletSet.from_token(bcs[0])
    M = asm.univariate_mass(space, D)
    K = asm.univariate_stiffness(space, D)
    spec_ = spectral.build_univariate_spectral(space, D, M, K)
    lines = [SPECTRUM_HEADER]
    for j in range(spec_.splitting.n_reg):
        lines.append(f"{j + 1},{spec_.nodes.alphas[j]:.16e},"
                     f"{spec_.d_tilde[j]:.16e},{spec_.lambda_reg[j]:.16e}")
    return "\n".join(lines) + "\n", spec_, M, K


# ---------------------------------------------------------------------------
# selftest

SELFTEST_SIZES = (3, 4, 5, 6, 7, 8, 9, 255, 256, 257, 1000)


def run_selftest(corrupt: str | None = None, quiet: bool = False) -> list[str]:
    """Transform fast-vs-reference and orthonormality checks.

    Returns the list of failed invariant names; ``corrupt`` injects a fault
    into the named transform family (test hook).
    """
    failures = []
    rng = np.random.default_rng(20240814)

    def log(msg):
        if not quiet:
            print(msg)

    for fam in transforms.FAMILIES:
        worst = 0.0
        for nreg in SELFTEST_SIZES:
            if fam == "DCT-I" and nreg < 2:
                continue
            kind = transforms.TransformKind(fam, nreg)
            X = rng.standard_normal((8, nreg))
            ref = transforms.apply_reference(kind, X)
            fast = transforms.apply(kind, X)
            if corrupt == fam:
                fast = fast + 1e-3
            scale = max(1.0, float(np.abs(ref).max()))
            worst = max(worst, float(np.abs(fast - ref).max()) / scale)
        status = "ok" if worst <= 1e-12 else "FAIL"
        log(f"transform {fam}: max rel err {worst:.2e} [{status}]")
        if worst > 1e-12:
            failures.append(f"transform-fast-vs-reference:{fam}")

    for p in (2, 3, 4, 5):
        for tok in ("dd", "dn", "nd", "nn"):
            space = SplineSpace(p, 16)
            D = DirichletSet.from_token(tok)
            M = asm.univariate_mass(space, D)
            K = asm.univariate_stiffness(space, D)
            spec_ = spectral.build_univariate_spectral(space, D, M, K)
            res = spectral.verify_spectral(spec_, M, K)
            bad = [k for k, v in res.items() if v > 1e-9]
            status = "ok" if not bad else "FAIL"
            log(f"orthogonality p={p} bc={tok}: "
                + " ".join(f"{k}={v:.1e}" for k, v in res.items()) + f" [{status}]")
            failures.extend(f"orthogonality:{k}:p={p}:bc={tok}" for k in bad)
    return failures


# ---------------------------------------------------------------------------
# argument parsing and entry point


def _add_solve_flags(sub):
    sub.add_argument("--config", help="key = value configuration file")
    sub.add_argument("--domain", choices=sorted(DOMAINS))
    sub.add_argument("--n", help="elements per direction (int or comma list)")
    sub.add_argument("--p", type=int, help="spline degree")
    sub.add_argument("--bc", help="per-direction boundary tokens, e.g. dd,dn")
    sub.add_argument("--precond", choices=("none", "fd", "iffd"))
    sub.add_argument("--tol", type=float)
    sub.add_argument("--max-iters", type=int, dest="max_iters")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--c0-knots", dest="c0_knots",
                     help="breakpoint indices in direction 1 made C0")
    sub.add_argument("--out", help="output path (default stdout)")
    sub.add_argument("--format", choices=("csv", "md"))


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    updates = {}
    for key in ("domain", "p", "precond", "tol", "max_iters", "seed", "out", "format"):
        val = getattr(args, key, None)
        if val is not None:
            updates[key] = val
    if getattr(args, "n", None) is not None:
        updates["n"] = _parse_int_tuple(args.n)
    if getattr(args, "bc", None) is not None:
        updates["bc"] = tuple(t.strip() for t in args.bc.split(","))
    if getattr(args, "c0_knots", None) is not None:
        updates["c0_knots"] = _parse_int_tuple(args.c0_knots)
    return replace(cfg, **updates).validate()


def _emit(text: str, out: str) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="iffd",
        description="Spline Poisson solves with fast-diagonalization preconditioners")
    subs = parser.add_subparsers(dest="command", required=True)

    s_solve = subs.add_parser("solve", help="run one problem, emit a result row")
    _add_solve_flags(s_solve)
    s_solve.add_argument("--dump-matrix", help="write the operator in Matrix Market format")
    s_solve.add_argument("--dump-solution", help="write the solution vector (text)")

    s_bench = subs.add_parser("bench", help="iteration-count table over a fixed grid")
    s_bench.add_argument("table", choices=sorted(BENCH_TABLES))
    s_bench.add_argument("--seed", type=int, default=1)
    s_bench.add_argument("--out")
    s_bench.add_argument("--format", choices=("csv", "md"), default="csv")

    s_spec = subs.add_parser("spectrum", help="per-frequency diagonal data of one direction")
    _add_solve_flags(s_spec)
    s_spec.add_argument("--verify", action="store_true",
                        help="compare symbols against the dense oracle")

    s_test = subs.add_parser("selftest", help="transform and orthogonality self-checks")
    s_test.add_argument("--corrupt", help=argparse.SUPPRESS)

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            cfg = _config_from_args(args)
            row, x, _report = run_solve(cfg)
            if args.dump_matrix:
                _, _, _, A = build_problem(cfg)
                if isinstance(A, asm.KroneckerSurrogate):
                    import scipy.sparse as sp
                    A = sp.csr_matrix(A.todense())
                asm.write_matrix_market(args.dump_matrix, A)
            if args.dump_solution:
                np.savetxt(args.dump_solution, x)
            text = rows_to_csv([row]) if cfg.format == "csv" else rows_to_markdown([row])
            _emit(text, cfg.out)
            return 0
        if args.command == "bench":
            rows = bench_rows(args.table, seed=args.seed)
            text = rows_to_csv(rows) if args.format == "csv" else rows_to_markdown(rows, args.table)
            _emit(text, args.out or "")
            return 0
        if args.command == "spectrum":
            cfg = _config_from_args(args)
            text, spec_, M, K = spectrum_rows(cfg)
            _emit(text, cfg.out)
            if args.verify:
                res = spectral.verify_spectral(spec_, M, K)
                bad = {k: v for k, v in res.items() if v > 1e-8}
                if bad:
                    print(f"spectrum verification FAILED: {bad}", file=sys.stderr)
                    return 1
                print("spectrum verified against dense oracle", file=sys.stderr)
            return 0
        if args.command == "selftest":
            failures = run_selftest(corrupt=args.corrupt)
            if failures:
                print("FAILED invariants: " + ", ".join(failures))
                return 1
            print("all self-tests passed")
            return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SingularGeometryError, UnsupportedSizeError, VerificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
