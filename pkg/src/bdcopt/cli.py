"""Command-line experiment driver.

Subcommands: ``monomial``, ``sdl``, ``relu``, ``tensor``, ``plan-rho``.
Configuration precedence is built-in defaults < ``--config`` file (flat
``key=value`` lines) < command-line flags; every config key has a flag of the
same name.  All emitted CSVs are deterministic given the configuration; the
run manifest (written before, finalized after each run) carries the wall time
and output list.  ``BDC_OUT_DIR`` overrides the output directory.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from . import experiments
from . import relu as relu_mod
from .monomials import (Monomial, atoms_to_csv, bdc_block_decompose,
                        dc_atom_bounds, merge_proportional, polarize,
                        verify_identity)
from .solvers import plan_rho

__all__ = ["main"]


def _fmt(x):
    return repr(float(x))


def _git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


class Manifest:
    def __init__(self, outdir, subcommand, config, seeds):
        self.path = os.path.join(outdir, "%s_manifest.json" % subcommand)
        self.payload = {
            "subcommand": subcommand,
            "config": config,
            "seeds": list(seeds),
            "build": _git_describe(),
            "status": "running",
            "wall_s": None,
            "outputs": [],
        }
        self.t0 = time.perf_counter()
        self._write()

    def _write(self):
        with open(self.path, "w") as fh:
            json.dump(self.payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def finalize(self, outputs):
        self.payload["status"] = "complete"
        self.payload["wall_s"] = time.perf_counter() - self.t0
        self.payload["outputs"] = [os.path.basename(p) for p in outputs]
        self._write()


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            str(v) if isinstance(v, (int, np.integer)) else _fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _fail(reason):
    print("error: %s" % reason, file=sys.stderr)
    return 1


def _load_config_file(path, defaults):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError("%s:%d: expected key=value" % (path, lineno))
            key, raw = (t.strip() for t in line.split("=", 1))
            if key not in defaults:
                raise ValueError("%s:%d: unknown key %r" % (path, lineno, key))
            ref = defaults[key]
            if isinstance(ref, bool):
                values[key] = raw.lower() in ("1", "true", "yes")
            elif isinstance(ref, int):
                values[key] = int(raw)
            elif isinstance(ref, float):
                values[key] = float(raw)
            else:
                values[key] = raw
    return values


def _resolve(defaults, args):
    """defaults < config file < explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config, defaults))
    for key in defaults:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg[key] = val
    return cfg


def _outdir(cfg):
    out = os.environ.get("BDC_OUT_DIR") or cfg.get("outdir") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _parse_exponents(text):
    try:
        b = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("exponents must be comma-separated integers")
    return b


def _parse_grouping(text, n_vars):
    groups = []
    for part in text.split("|"):
        idx = tuple(int(t) - 1 for t in part.split(",") if t.strip())
        if any(j < 0 or j >= n_vars for j in idx):
            raise ValueError("group index out of range in %r" % part)
        groups.append(idx)
    return groups


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

MONOMIAL_DEFAULTS = {"trials": 100, "tol": 1e-6, "outdir": ""}


def cmd_monomial(args):
    cfg = _resolve(MONOMIAL_DEFAULTS, args)
    out = _outdir(cfg)
    manifest = Manifest(out, "monomial", dict(cfg, b=",".join(map(str, args.b))), [0])
    m = Monomial(args.b)
    names = ["t%d" % (j + 1) for j in range(m.n_vars)]

    def atom_str(atom, local_names):
        terms = []
        for c, nm in zip(atom.form, local_names):
            if c:
                terms.append("%+d*%s" % (c, nm))
        if atom.shift:
            terms.append("%+d" % atom.shift)
        body = " ".join(terms) if terms else "0"
        return "%s * (%s)^%d" % (atom.weight, body, atom.power)

    if args.bounds:
        lo, hi = dc_atom_bounds(m)
        print("lower=%d upper=%d" % (lo, hi))
        manifest.finalize([])
        return 0

    outputs = []
    if args.group:
        try:
            grouping = _parse_grouping(args.group, m.n_vars)
            dec = bdc_block_decompose(m, grouping)
        except ValueError as exc:
            return _fail(str(exc))
        counts = "+".join(str(c) for c in dec.atom_counts)
        print("atoms=%d (%s)" % (dec.total_atoms, counts))
        for vars_, part in dec.parts:
            local = [names[j] for j in vars_]
            print("block {%s}:" % ",".join(local))
            for atom in part.atoms:
                print("  " + atom_str(atom, local))
        ok, err = verify_identity(dec, m, trials=cfg["trials"], tol=cfg["tol"])
    else:
        dec = polarize(m)
        lo, hi = dc_atom_bounds(m)
        print("atoms=%d bounds: lower=%d upper=%d" % (dec.n_atoms, lo, hi))
        if args.merged_count:
            print("atoms_merged=%d" % merge_proportional(dec).n_atoms)
        for atom in dec.atoms:
            print(atom_str(atom, names))
        if args.csv:
            path = os.path.join(out, args.csv)
            atoms_to_csv(dec, path)
            outputs.append(path)
            print("wrote %s" % path)
        ok, err = verify_identity(dec, m, trials=cfg["trials"], tol=cfg["tol"])

    print("max_rel_err=%s" % _fmt(err))
    manifest.finalize(outputs)
    if args.verify:
        print("verify=%s" % ("pass" if ok else "fail"))
        if not ok:
            return _fail("identity verification failed (max_rel_err=%s)" % _fmt(err))
    return 0


SDL_DEFAULTS = {
    "m": 10, "l": 32, "n": 100, "k_nonzero": 5, "alpha": 0.1, "q": 5,
    "iters": 700, "seeds": 10, "seed": 0, "inner_x": 10, "inner_d": 5,
    "inner_tol": 1e-8, "variant": "both", "gd_iters": 300, "gd_seeds": 3,
    "outdir": "",
}


def cmd_sdl(args):
    cfg = _resolve(SDL_DEFAULTS, args)
    out = _outdir(cfg)
    variants = ("l1", "l1_lq") if cfg["variant"] == "both" else (cfg["variant"],)
    if any(v not in ("l1", "l1_lq") for v in variants):
        return _fail("variant must be 'l1', 'l1_lq' or 'both'")
    manifest = Manifest(out, "sdl", cfg, list(range(cfg["seeds"])))

    res = experiments.run_sdl_experiment(
        m=cfg["m"], l=cfg["l"], n=cfg["n"], k_nonzero=cfg["k_nonzero"],
        alpha=cfg["alpha"], q=cfg["q"], n_outer=cfg["iters"],
        n_seeds=cfg["seeds"], seed=cfg["seed"], inner_x=cfg["inner_x"],
        inner_d=cfg["inner_d"], inner_tol=cfg["inner_tol"], variants=variants)

    tags = {"l1": "L1", "l1_lq": "LQ"}
    iters = np.arange(cfg["iters"] + 1)

    def table(metric, extra=None):
        header = ["iter"]
        cols = [iters]
        for v in variants:
            bands = experiments.sdl_band_columns(metric[v])
            base = "rec_errors" if metric is res.rec else "sparsities"
            header.append("%s_%s" % (base, tags[v]))
            cols.append(bands["mean"])
            for kind in ("lower_minmax", "upper_minmax", "lower_2sd", "upper_2sd"):
                header.append("%s_%s" % (kind, tags[v]))
                cols.append(bands[kind])
        if extra:
            header.append(extra[0])
            cols.append(np.full(len(iters), extra[1]))
        return header, list(zip(*cols))

    outputs = []
    header, rows = table(res.rec)
    outputs.append(_write_csv(os.path.join(out, "sdl_rec_errors.csv"), header, rows))
    header, rows = table(res.sparsity, extra=("true_sparsity", res.true_sparsity))
    outputs.append(_write_csv(os.path.join(out, "sdl_sparsities.csv"), header, rows))

    if args.compare_gd:
        rows = experiments.run_sdl_gd_comparison(
            m=cfg["m"], l=cfg["l"], n=cfg["n"], k_nonzero=cfg["k_nonzero"],
            alpha=cfg["alpha"], q=cfg["q"], n_outer=cfg["gd_iters"],
            n_seeds=cfg["gd_seeds"], seed=cfg["seed"], inner_x=cfg["inner_x"],
            inner_d=cfg["inner_d"], inner_tol=cfg["inner_tol"])
        outputs.append(_write_csv(
            os.path.join(out, "sdl_gd_compare.csv"),
            ["seed", "oracle_calls", "bdca_final", "gd_final"],
            [(r["seed"], r["oracle_calls"], r["bdca_final"], r["gd_final"]) for r in rows]))

    # internal gate: sparsity values must be valid proportions
    for v in variants:
        if not np.all((res.sparsity[v] >= 0) & (res.sparsity[v] <= 1)):
            return _fail("sparsity out of [0, 1] for variant %s" % v)
    manifest.finalize(outputs)
    for p in outputs:
        print("wrote %s" % p)
    return 0


RELU_DEFAULTS = {
    "task": "blobs", "widths": "16,8", "n_data": 200, "classes": 3,
    "epochs": 5, "batch_size": 16, "rho": 1.0, "theory_preset": False,
    "rho_coeff": 0.5, "batch_coeff": 0.5, "inner_budget": 25,
    "inner_tol": 1e-8, "stride": 10, "delta": 0.25, "seed": 0, "outdir": "",
}


def cmd_relu(args):
    cfg = _resolve(RELU_DEFAULTS, args)
    out = _outdir(cfg)
    manifest = Manifest(out, "relu", cfg, [cfg["seed"]])
    widths = tuple(int(t) for t in str(cfg["widths"]).split(",") if t.strip())
    res = experiments.run_relu_experiment(
        task=cfg["task"], layer_dims=widths, n_data=cfg["n_data"],
        n_classes=cfg["classes"], epochs=cfg["epochs"],
        batch_size=cfg["batch_size"], rho=cfg["rho"],
        theory_preset=cfg["theory_preset"], rho_coeff=cfg["rho_coeff"],
        batch_coeff=cfg["batch_coeff"], inner_budget=cfg["inner_budget"],
        inner_tol=cfg["inner_tol"], stride=cfg["stride"], delta=cfg["delta"],
        seed=cfg["seed"])
    outputs = [
        _write_csv(os.path.join(out, "relu_loss_seed%d.csv" % cfg["seed"]),
                   ["k", "loss", "residual_upper"], res.loss_rows),
        _write_csv(os.path.join(out, "relu_smoothness_seed%d.csv" % cfg["seed"]),
                   ["logG", "logLhat", "t", "block"],
                   [(a, b, int(t), int(bl)) for a, b, t, bl in res.scatter_rows]),
    ]
    if args.dump_trace:
        path = os.path.join(out, "relu_trace_seed%d.csv" % cfg["seed"])
        res.trace.write_csv(path, timing=False)  # timing would break replays
        outputs.append(path)
    if args.save_params:
        path = os.path.join(out, "relu_params_seed%d.csv" % cfg["seed"])
        final = res.problem.params(res.trace.final_theta)
        relu_mod.save_params_csv(final, path)
        outputs.append(path)
    # internal gate: every recorded value finite
    if res.loss_rows and not np.all(np.isfinite([r[1] for r in res.loss_rows])):
        return _fail("non-finite loss encountered")
    if res.scatter_rows and not np.all(np.isfinite(np.array(res.scatter_rows))):
        return _fail("non-finite smoothness estimate encountered")
    manifest.finalize(outputs)
    for p in outputs:
        print("wrote %s" % p)
    return 0


TENSOR_DEFAULTS = {
    "dims": "4,5,6", "rank": 2, "sweeps": 200, "seed": 0, "noise": 0.0,
    "outdir": "",
}


def cmd_tensor(args):
    cfg = _resolve(TENSOR_DEFAULTS, args)
    out = _outdir(cfg)
    try:
        dims = tuple(int(t) for t in str(cfg["dims"]).split(","))
        if len(dims) < 2 or len(dims) > 4 or any(d < 1 for d in dims):
            raise ValueError
    except ValueError:
        return _fail("dims must be 2 to 4 comma-separated positive integers")
    manifest = Manifest(out, "tensor", cfg, [cfg["seed"]])
    rows, per_update, _, _ = experiments.run_tensor_experiment(
        dims=dims, rank=cfg["rank"], sweeps=cfg["sweeps"], seed=cfg["seed"],
        noise=cfg["noise"])
    outputs = [_write_csv(os.path.join(out, "tensor_trace.csv"),
                          ["sweep", "objective", "rel_error"], rows)]
    # internal gate: exact block minimization must never increase the objective
    if np.any(np.diff(per_update) > 1e-9 * (1.0 + np.abs(per_update[:-1]))):
        return _fail("objective increased during a block update")
    manifest.finalize(outputs)
    for p in outputs:
        print("wrote %s" % p)
    return 0


PLAN_RHO_DEFAULTS = {
    "G": 1.0, "R": 0.0, "ell": "constant", "ell_l0": 1.0, "ell_a": 1.0,
    "ell_c": 1.0, "outdir": "",
}


def cmd_plan_rho(args):
    cfg = _resolve(PLAN_RHO_DEFAULTS, args)
    manifest = Manifest(_outdir(cfg), "plan-rho", cfg, [])
    if cfg["ell"] == "constant":
        ell = lambda u: cfg["ell_l0"]
    elif cfg["ell"] == "affine":
        ell = lambda u: cfg["ell_a"] + cfg["ell_c"] * u
    else:
        return _fail("ell must be 'constant' or 'affine'")
    try:
        plan = plan_rho(ell, cfg["G"], cfg["R"])
    except ValueError as exc:
        return _fail(str(exc))
    print("E=%s" % _fmt(plan.E))
    print("L_eff=%s" % _fmt(plan.L_eff))
    print("rho_min=%s" % _fmt(plan.rho_min))
    manifest.finalize([])
    return 0


# ---------------------------------------------------------------------------

def _add_common(sub, defaults):
    sub.add_argument("--config", help="flat key=value config file")
    for key, ref in defaults.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(ref, bool):
            sub.add_argument(flag, dest=key, action="store_true", default=None)
        elif isinstance(ref, int):
            sub.add_argument(flag, dest=key, type=int, default=None)
        elif isinstance(ref, float):
            sub.add_argument(flag, dest=key, type=float, default=None)
        else:
            sub.add_argument(flag, dest=key, type=str, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bdc", description="block difference-of-convex toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    mono = subs.add_parser("monomial", help="decompositions and atom bounds")
    mono.add_argument("--b", type=_parse_exponents, required=True,
                      help="comma-separated exponents, e.g. 1,1,2,4")
    mono.add_argument("--group", help="variable groups, 1-based, e.g. 1,2|3,4")
    mono.add_argument("--bounds", action="store_true", help="print atom-count bounds only")
    mono.add_argument("--verify", action="store_true", help="exit nonzero unless the identity verifies")
    mono.add_argument("--merged-count", action="store_true",
                      help="also report the count after merging proportional atoms")
    mono.add_argument("--csv", help="export atoms to this CSV file")
    _add_common(mono, MONOMIAL_DEFAULTS)
    mono.set_defaults(func=cmd_monomial)

    sdl = subs.add_parser("sdl", help="sparse dictionary learning experiment")
    sdl.add_argument("--compare-gd", action="store_true",
                     help="also run the joint gradient-descent baseline")
    _add_common(sdl, SDL_DEFAULTS)
    sdl.set_defaults(func=cmd_sdl)

    relu_p = subs.add_parser("relu", help="toy split-network training")
    relu_p.add_argument("--dump-trace", action="store_true",
                        help="also write the per-iteration solver trace")
    relu_p.add_argument("--save-params", action="store_true",
                        help="checkpoint the trained parameters as CSV")
    _add_common(relu_p, RELU_DEFAULTS)
    relu_p.set_defaults(func=cmd_relu)

    tensor = subs.add_parser("tensor", help="alternating least-squares factorization")
    _add_common(tensor, TENSOR_DEFAULTS)
    tensor.set_defaults(func=cmd_tensor)

    plan = subs.add_parser("plan-rho", help="gradient-bound and proximal-weight planner")
    _add_common(plan, PLAN_RHO_DEFAULTS)
    plan.set_defaults(func=cmd_plan_rho)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
