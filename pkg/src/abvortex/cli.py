"""Command-line front end: point evaluation, verification suites, surface grids.

Exit codes: 0 success, 1 a verification check failed, 2 usage or domain
error (the error class name is printed as ``error = <Name>``).
"""

import argparse
import concurrent.futures
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AbVortexError

SCHEMA_VERSION = 1
THREADS_ENV = "ABVORTEX_THREADS"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

@dataclass
class RunConfig:
    """Resolved run parameters; round-trips through the key-value file."""

    alpha: float = 1.0 / 3.0
    beta: float = 2.0 / 3.0
    rho: float = 1.0
    z_re: float = 0.0
    z_im: float = 1.0
    grid_tol: float = 1e-10
    tail_tol: float = 1e-10
    report_tol: float = 1e-6
    x_min: float = -1.5
    x_max: float = 2.5
    y_min: float = -1.5
    y_max: float = 2.5
    nx: int = 161
    ny: int = 161
    out_dir: str = "."
    threads: int = 1

    @property
    def z(self):
        return complex(self.z_re, self.z_im)

    def pair(self):
        from .geometry import VortexPair
        return VortexPair(self.alpha, self.beta, self.rho)


def format_config(cfg):
    """Key-value text with ``schema_version`` first; floats in repr form."""
    lines = [f"schema_version = {SCHEMA_VERSION}"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {getattr(cfg, f.name)!r}".replace("'", ""))
    return "\n".join(lines) + "\n"


def parse_config(text):
    """Inverse of :func:`format_config`; unknown keys are an error."""
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    version = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "schema_version":
            version = int(val)
            continue
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        kind = types[key]
        values[key] = {"float": float, "int": int, "str": str}[
            kind if isinstance(kind, str) else kind.__name__](val)
    if version != SCHEMA_VERSION:
        raise ValueError(f"config schema_version must be {SCHEMA_VERSION}")
    return RunConfig(**values)


def _complex(text):
    s = text.replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x1,x2 but got {text!r}")
    return (a, b)


def resolve_config(args):
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = parse_config(Path(args.config).read_text())
    for key in ("alpha", "beta", "rho", "out_dir", "nx", "ny"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "z", None) is not None:
        cfg.z_re, cfg.z_im = args.z.real, args.z.imag
    env = os.environ.get(THREADS_ENV)
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    elif env:
        cfg.threads = int(env)
    return cfg


def fmt(x):
    """17 significant digits; complex values as ``re im``."""
    x = np.asarray(x).item()
    if isinstance(x, complex):
        return f"{x.real:.17g} {x.imag:.17g}"
    return f"{float(x):.17g}"


# ----------------------------------------------------------------------
# eval
# ----------------------------------------------------------------------

def _channel(args):
    return (args.u, args.nu)


def evaluate_target(args, cfg):
    """Value(s) and an error bound for one ``eval`` target."""
    from . import deficiency_two as dt
    from . import krein_pauli as kp
    from . import one_vortex as ov
    from . import two_vortex_green as tg

    pair, z = cfg.pair(), cfg.z
    t = args.target
    if t == "green1":
        val = ov.green_one(z, cfg.alpha, args.x, args.x0, tol=cfg.grid_tol)
        return {"value": val}, cfg.grid_tol
    if t == "green2":
        rep = tg.green_two_report(z, pair, args.x, args.x0, tg.RESUMMED, cfg.grid_tol)
        return {"value": rep.value}, max(rep.tail_bound, cfg.grid_tol)
    if t == "psi":
        return {"value": dt.psi(_channel(args), z, pair, args.at, tol=cfg.grid_tol)}, cfg.grid_tol
    if t == "pauli-green":
        val = kp.pauli_green(args.spin, z, pair, args.x, args.x0, tol=cfg.grid_tol)
        return {"value": val}, cfg.grid_tol
    if t in ("S", "T"):
        own = args.u or "a"
        mats = dt.asymptotic_matrices(z, pair, own=own, tol=cfg.grid_tol)
        m = mats.S if t == "S" else mats.T
        return {f"{t}[{i}][{j}]": complex(m[i, j]) for i in range(2) for j in range(2)}, cfg.grid_tol
    if t == "M":
        M = kp.krein_matrix(args.spin, z, pair, tol=cfg.grid_tol)
        out = {f"M_red[{i}][{j}]": complex(M.reduced[i, j]) for i in range(2) for j in range(2)}
        out["embedding"] = "channels " + ",".join(str(i + 1) for i in M.indices) + " of 4"
        out["condition"] = M.condition
        return out, cfg.grid_tol
    raise ValueError(f"unknown target {t!r}")


def cmd_eval(args, cfg, out):
    start = time.perf_counter()
    values, bound = evaluate_target(args, cfg)
    elapsed = time.perf_counter() - start
    for key, val in values.items():
        out.write(f"{key} = {val if isinstance(val, str) else fmt(val)}\n")
    out.write(f"error_bound = {fmt(bound)}\n")
    out.write(f"elapsed_s = {elapsed:.3f}\n")
    return EXIT_OK


# ----------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float
    anchor: str

    @property
    def passed(self):
        return bool(np.isfinite(self.residual) and self.residual < self.tolerance)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name} residual={self.residual:.3e} "
                f"tol={self.tolerance:.1e} [{self.anchor}]")


def suite_identities(cfg, scale):
    from scipy.special import kv

    from . import one_vortex as ov
    from . import two_vortex_green as tg
    from .geometry import VortexPair
    from .quadrature import bessel_convolution_integral, bessel_product_integral
    from .special import bessel_k

    out = []
    for a, b in ((0.5, 0.5), (1.0, 2.0), (3.0, 1.0)):
        v = bessel_product_integral(a, b)
        ref = np.pi * kv(0, a + b)
        out.append(CheckResult(f"product_integral(a={a},b={b})", abs(v / ref - 1),
                               1e-8 * scale, "K_it(a) K_-it(b) integrates to pi K_0(a+b)"))
    for nu in (0.0, 0.7, 1.5):
        v = bessel_convolution_integral(1.0, 2.0, nu)
        ref = np.pi * bessel_k(1j * nu, 3.0)
        out.append(CheckResult(f"convolution_integral(nu={nu})", abs(v / ref - 1),
                               1e-8 * scale, "Bessel convolution identity"))
    pair, z = cfg.pair(), cfg.z
    x, x0 = (0.4, 0.3), (-0.5, 0.7)
    g = tg.green_two(z, pair, x, x0)
    gt = tg.green_two(np.conj(z), pair, x0, x)
    out.append(CheckResult("green_two_hermitian", abs(g - np.conj(gt)), 1e-8 * scale,
                           "G_z(x,x0) = conj G_conj(z)(x0,x)"))
    red = VortexPair(cfg.alpha, 0.0, cfg.rho)
    v2 = tg.green_two(z, red, x, x0)
    v1 = ov.green_one(z, cfg.alpha, x, x0)
    out.append(CheckResult("green_two_beta_zero", abs(v2 - v1), 1e-6 * scale,
                           "second flux zero reduces to one vortex"))
    return out


def suite_cuts(cfg, scale):
    from .deficiency_two import CHANNELS, verify_cut_conditions
    return [CheckResult(f"cut_conditions(channel {ch.flat})",
                        verify_cut_conditions(ch, cfg.z, cfg.pair()), 1e-6 * scale,
                        "phase jumps of values and radial derivatives on both cuts")
            for ch in CHANNELS]


def suite_asymptotics(cfg, scale):
    from .deficiency_two import CHANNELS, asymptotic_check
    out = []
    for ch in CHANNELS:
        rep = asymptotic_check(ch, cfg.z, cfg.pair())
        sing = max(v for k, v in rep.errors.items() if "singular" in k)
        reg = max(v for k, v in rep.errors.items() if "regular" in k)
        out.append(CheckResult(f"singular_coefficients(channel {ch.flat})", sing,
                               1e-4 * scale, "leading near-vortex singularity"))
        out.append(CheckResult(f"regular_coefficients(channel {ch.flat})", reg,
                               1e-3 * scale, "subleading terms from S and T"))
    return out


def suite_krein(cfg, scale):
    from . import krein_pauli as kp
    pair, z = cfg.pair(), cfg.z
    w = complex(z.real, 2 * z.imag) if z.imag else z - 1.0
    out = []
    for spin in ("+", "-"):
        M = kp.krein_matrix(spin, z, pair).full
        other = [i for i in range(4) if i not in kp.SPIN_INDICES[spin]]
        zero = float(max(np.abs(M[other, :]).max(), np.abs(M[:, other]).max()))
        # structural zeros: any nonzero entry fails regardless of scaling
        out.append(CheckResult(f"zero_pattern({spin})", zero, np.finfo(float).tiny,
                               "Krein matrix vanishes off its spin block"))
        out.append(CheckResult(f"conj_transpose({spin})",
                               kp.conj_transpose_residual(spin, z, pair), 1e-9 * scale,
                               "M_z^* = M_conj(z)"))
        out.append(CheckResult(f"hilbert_identity({spin})",
                               kp.hilbert_identity_residual(spin, z, w, pair), 1e-6 * scale,
                               "M_z - M_w = (z-w) M_z P M_w"))
        out.append(CheckResult(f"reduced_block({spin})",
                               kp.reduced_block_residual(spin, z, w, pair), 1e-8 * scale,
                               "reduced Gram block equals difference of inverse Krein blocks"))
    return out


def suite_zero_modes(cfg, scale):
    from . import boundary_analysis as ba
    from . import krein_pauli as kp
    from .geometry import VortexPair
    out = []
    for spin, flux, ext in (("+", 1.0 / 3.0, "H+"), ("-", 2.0 / 3.0, "H-")):
        pair = VortexPair(flux, flux, cfg.rho)
        out.append(CheckResult(f"zero_mode_residual({spin})",
                               kp.zero_mode_residual(spin, pair, (0.4, 0.3)), 1e-6 * scale,
                               "first-order factor annihilates the zero mode"))
        bds = [ba.phi_functionals(lambda p, s=spin, c=pair: kp.zero_mode(s, c, p),
                                  v, flux, rho=cfg.rho) for v in ("a", "b")]
        mem = ba.check_domain_membership(bds, ext, tol=1e-4 * scale)
        out.append(CheckResult(f"zero_mode_domain({spin})", max(mem.residuals),
                               1e-4 * scale, "zero mode satisfies its boundary condition"))
    return out


SUITES = {
    "identities": suite_identities,
    "cuts": suite_cuts,
    "asymptotics": suite_asymptotics,
    "krein": suite_krein,
    "zero-modes": suite_zero_modes,
}


def cmd_verify(args, cfg, out):
    if args.tol_scale <= 0:
        raise ValueError("--tol-scale must be positive")
    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        for res in SUITES[name](cfg, args.tol_scale):
            out.write(f"{name}: {res.line()}\n")
            ok &= res.passed
    out.write(f"summary = {'PASS' if ok else 'FAIL'}\n")
    return EXIT_OK if ok else EXIT_FAIL


# ----------------------------------------------------------------------
# grid
# ----------------------------------------------------------------------

GRID_FUNCTIONS = ("psi-a-lower", "psi-a-upper", "psi-b-lower", "psi-b-upper",
                  "green2", "pauli-green-plus", "pauli-green-minus")
MASK_OK, MASK_SINGULAR, MASK_CUT = 0, 1, 2
SINGULAR_RADIUS = 1e-9

PLOT_SCRIPT = '''"""Plot |f| from the grid CSV next to this script (needs matplotlib)."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).with_suffix("")
rows = list(csv.DictReader(open(str(here) + ".csv")))
x1 = np.array([float(r["x1"]) for r in rows])
x2 = np.array([float(r["x2"]) for r in rows])
mag = np.array([float(r["abs"]) for r in rows])
nx = len(np.unique(x1))
ny = len(np.unique(x2))
X, Y, Z = (a.reshape(ny, nx) for a in (x1, x2, mag))
ax = plt.figure().add_subplot(projection="3d")
ax.plot_surface(X, Y, np.ma.masked_invalid(Z), cmap="viridis")
ax.set_xlabel("x1")
ax.set_ylabel("x2")
plt.savefig(str(here) + ".png", dpi=150)
if "--show" in sys.argv:
    plt.show()
'''


def _singular_points(fid, cfg, x0):
    if fid.startswith("psi-"):
        return [cfg.pair().center(fid.split("-")[1])]
    return [(0.0, 0.0), (cfg.rho, 0.0), x0]


def _grid_evaluator(fid, cfg, x0):
    from . import deficiency_two as dt
    from . import krein_pauli as kp
    from . import two_vortex_green as tg

    pair, z = cfg.pair(), cfg.z
    if fid.startswith("psi-"):
        _, u, which = fid.split("-")
        ch = dt.ChannelIndex(u, dt.LOWER if which == "lower" else dt.UPPER)
        basis = dt.deficiency_basis(z, pair, cfg.grid_tol)
        return lambda x1, x2, s: basis.evaluate(ch, x1, x2, s)
    if fid == "green2":
        return lambda x1, x2, s: tg.green_two_arrays(z, pair, x1, x2, s, x0[0], x0[1], 0,
                                                     tol=cfg.grid_tol)
    spin = "+" if fid.endswith("plus") else "-"
    return lambda x1, x2, s: kp.pauli_green_arrays(spin, z, pair, x1, x2, s,
                                                   x0[0], x0[1], 0, tol=cfg.grid_tol)


def compute_grid(fid, cfg, x0=None):
    """Samples, mask and coordinates of one surface grid.

    Points within ``SINGULAR_RADIUS`` of a singularity are masked and left
    as NaN; points on a cut are evaluated from the upper side and flagged.
    Rows are evaluated in parallel blocks and assembled in row order.
    """
    if x0 is None and not fid.startswith("psi-"):
        raise ValueError(f"--x0 is required for {fid}")
    xs = np.linspace(cfg.x_min, cfg.x_max, cfg.nx)
    ys = np.linspace(cfg.y_min, cfg.y_max, cfg.ny)
    X, Y = np.meshgrid(xs, ys)
    mask = np.zeros(X.shape, dtype=int)
    for c in _singular_points(fid, cfg, x0):
        mask[np.hypot(X - c[0], Y - c[1]) < SINGULAR_RADIUS] = MASK_SINGULAR
    on_cut = (Y == 0.0) & ((X < 0.0) | (X > cfg.rho)) & (mask == MASK_OK)
    mask[on_cut] = MASK_CUT
    f = _grid_evaluator(fid, cfg, x0)
    vals = np.full(X.shape, np.nan + 0j)

    def row_block(rows):
        block = np.full((len(rows), X.shape[1]), np.nan + 0j)
        for k, i in enumerate(rows):
            ok = mask[i] != MASK_SINGULAR
            side = np.where(mask[i] == MASK_CUT, 1, 0)[ok]
            if np.any(ok):
                block[k, ok] = f(X[i, ok], Y[i, ok], side)
        return block

    blocks = [list(range(s, min(s + 8, cfg.ny))) for s in range(0, cfg.ny, 8)]
    threads = max(1, int(cfg.threads))
    if threads == 1:
        results = [row_block(b) for b in blocks]
    else:
        with concurrent.futures.ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(row_block, blocks))
    for b, res in zip(blocks, results):
        vals[b] = res
    bad = (mask != MASK_SINGULAR) & ~np.isfinite(vals)
    if np.any(bad):
        raise ArithmeticError(f"{int(bad.sum())} grid cells could not be evaluated")
    return X, Y, vals, mask


def write_grid(path_stem, X, Y, vals, mask, meta):
    stem = Path(path_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(stem.with_suffix(".csv"), "w", newline="\n") as fh:
        fh.write("x1,x2,re,im,abs,mask\n")
        for x1, x2, v, m in zip(X.ravel(), Y.ravel(), vals.ravel(), mask.ravel()):
            fh.write(f"{x1:.17g},{x2:.17g},{v.real:.17g},{v.imag:.17g},"
                     f"{abs(v):.17g},{m}\n")
    with open(stem.with_suffix(".json"), "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    stem.with_suffix(".plot.py").write_text(PLOT_SCRIPT)


def cmd_grid(args, cfg, out):
    x0 = tuple(args.x0) if args.x0 is not None else None
    start = time.perf_counter()
    X, Y, vals, mask = compute_grid(args.function, cfg, x0)
    stem = Path(cfg.out_dir) / args.function
    meta = {
        "function": args.function,
        "config": asdict(cfg),
        "schema_version": SCHEMA_VERSION,
        "source_point": list(x0) if x0 else None,
        "code_version": __version__,
        "threads_env": THREADS_ENV,
        "mask_codes": {"evaluated": MASK_OK, "singular": MASK_SINGULAR,
                       "cut_upper_side": MASK_CUT},
        "masked_cells": int(np.sum(mask == MASK_SINGULAR)),
    }
    write_grid(stem, X, Y, vals, mask, meta)
    out.write(f"csv = {stem.with_suffix('.csv')}\n")
    out.write(f"elapsed_s = {time.perf_counter() - start:.3f}\n")
    return EXIT_OK


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key-value config file")
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--z", type=_complex, help="spectral parameter, e.g. 0+1i")
    common.add_argument("--threads", type=int,
                        help=f"worker threads (default from {THREADS_ENV})")

    parser = argparse.ArgumentParser(prog="abvortex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", parents=[common], help="evaluate one quantity")
    ev.add_argument("target", choices=["green1", "green2", "psi", "pauli-green",
                                       "S", "T", "M"])
    ev.add_argument("--x", type=_pair)
    ev.add_argument("--x0", type=_pair)
    ev.add_argument("--at", type=_pair)
    ev.add_argument("--u", choices=["a", "b"])
    ev.add_argument("--nu", choices=["lower", "upper"], default="lower")
    ev.add_argument("--spin", choices=["plus", "minus"], default="plus")

    ve = sub.add_parser("verify", parents=[common], help="run a verification suite")
    ve.add_argument("suite", choices=list(SUITES) + ["all"])
    ve.add_argument("--tol-scale", type=float, default=1.0,
                    help="multiply every tolerance by this factor")

    gr = sub.add_parser("grid", parents=[common], help="write a surface grid")
    gr.add_argument("--function", required=True, choices=GRID_FUNCTIONS)
    gr.add_argument("--x0", type=_pair)
    gr.add_argument("--nx", type=int)
    gr.add_argument("--ny", type=int)
    gr.add_argument("--out-dir", dest="out_dir")

    cf = sub.add_parser("config", parents=[common], help="print the resolved config")
    cf.set_defaults(target=None)
    return parser


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ValueError("missing argument(s): " + ", ".join("--" + n for n in missing))


POINT_OPTIONS = ("--x", "--x0", "--at", "--z")


def _join_point_values(argv):
    """Attach values like ``-0.3,0.5`` to their option so argparse accepts them."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in POINT_OPTIONS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    argv = _join_point_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        cfg.pair()
        if args.command == "config":
            out.write(format_config(cfg))
            return EXIT_OK
        if args.command == "eval":
            needs = {"green1": ("x", "x0"), "green2": ("x", "x0"),
                     "pauli-green": ("x", "x0"), "psi": ("u", "at")}
            _require(args, *needs.get(args.target, ()))
            return cmd_eval(args, cfg, out)
        if args.command == "verify":
            return cmd_verify(args, cfg, out)
        return cmd_grid(args, cfg, out)
    except AbVortexError as exc:
        out.write(f"error = {exc.name}\nmessage = {exc}\n")
        return EXIT_USAGE
    except (ValueError, OSError, ArithmeticError) as exc:
        out.write(f"error = {type(exc).__name__}\nmessage = {exc}\n")
        return EXIT_USAGE
