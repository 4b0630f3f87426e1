"""Configuration-driven experiment runner.

Usage::

    localdenoise <command> [--config PATH] [--out DIR] [--seed U64] [--plot]

Commands: ``toric``, ``gauss-recovery``, ``sample``, ``mine``, ``reorg`` and
``fawzi-check``.  A JSON config holds ``{"experiment": ..., "seed": ...,
"out": ..., "plot": ..., "params": {...}}``; every key is optional and
command-line flags win.  Unknown keys are rejected before anything runs.

Each run writes its CSV/text outputs plus ``manifest.json`` (resolved config,
seed, package version) into the output directory.  Runs are deterministic:
the same manifest gives byte-identical CSVs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import __version__
from .checks import discrete_recovery_checks, gaussian_recovery_checks, telescoping_checks
from .gaussian import cmi_sweep, forward_step, gmrf_chain, gmrf_grid, markov_length_fit, multi_step_local_recovery, push
from .lattice import Lattice, check_schedule, reorganize, required_radius
from .mine import MineConfig, MineDivergence, read_samples_csv, train_mine
from .scorefield import Dataset, NoiseSchedule, SamplerConfig, SamplerDivergence, sample_backward
from .svgplot import line_chart, scatter_chart
from .toric import TorusCode, edge_tripartition, sample_loops, toric_cmi_sweep

__all__ = ["main", "ConfigError", "SCHEMAS", "run_experiment"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    pass


# -- schemas -------------------------------------------------------------------

_num = {"type": "number"}
_int = {"type": "integer"}
_bool = {"type": "boolean"}
_lattice = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"d": {"enum": [1, 2]}, "L": {"type": "integer", "minimum": 1}, "periodic": _bool},
}


def _params(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props}


PARAM_SCHEMAS = {
    "toric": _params(
        {
            "L": {"enum": [2, 3]},
            "r": {"type": "integer", "minimum": 0},
            "ps": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 0.5}, "minItems": 1},
            "loop_samples": {"type": "integer", "minimum": 0},
        }
    ),
    "gauss-recovery": _params(
        {
            "K": {"type": "integer", "minimum": 2},
            "d": {"enum": [1, 2]},
            "coupling": {"type": "number", "minimum": 0},
            "periodic": _bool,
            "N": {"type": "integer", "minimum": 1},
            "rs": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            "k": {"type": "integer", "minimum": 1},
            "t_max": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        }
    ),
    "sample": _params(
        {
            "dataset": {"type": "string"},
            "points": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 1}, "minItems": 1},
            "lattice": _lattice,
            "eta": {"type": "number"},
            "mode": {"enum": ["global", "local", "hybrid"]},
            "r": {"type": "integer", "minimum": 0},
            "k": {"type": "integer", "minimum": 1},
            "intervals": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
            "N": {"type": "integer", "minimum": 1},
            "t_min": {"type": "number", "exclusiveMinimum": 0},
            "t_max": {"type": "number", "maximum": 1},
            "n_samples": {"type": "integer", "minimum": 1},
            "denoise_final": _bool,
        }
    ),
    "mine": _params(
        {
            "samples": {"type": "string"},
            "a_columns": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            "s_columns": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            "rho": {"type": "number", "minimum": -1, "maximum": 1},
            "n": {"type": "integer", "minimum": 2},
            "batch_size": {"type": "integer", "minimum": 2},
            "learning_rate": _num,
            "iterations": {"type": "integer", "minimum": 1},
            "ema_rate": _num,
            "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            "holdout": _num,
        }
    ),
    "reorg": _params(
        {
            "d": {"enum": [1, 2]},
            "L": {"type": "integer", "minimum": 1},
            "periodic": _bool,
            "k": {"type": "integer", "minimum": 1},
            "r": {"type": "integer", "minimum": 0},
        }
    ),
    "fawzi-check": _params(
        {
            "discrete": {"type": "integer", "minimum": 0},
            "gaussian": {"type": "integer", "minimum": 0},
            "telescoping": {"type": "integer", "minimum": 0},
        }
    ),
}

DEFAULTS = {
    "toric": {"L": 3, "r": 1, "ps": [round(0.05 * i, 2) for i in range(11)], "loop_samples": 0},
    "gauss-recovery": {
        "K": 16, "d": 1, "coupling": 0.4, "periodic": False, "N": 8,
        "rs": [0, 1, 2, 3, 4, 5], "k": 1, "t_max": 0.98, "eps": 0.01,
    },
    "sample": {
        "points": [[-1.0, 0.0], [1.0, 0.0]], "eta": 0.0, "mode": "global", "r": 1, "k": 1,
        "intervals": [[0.2, 0.5]], "N": 200, "t_min": 0.01, "t_max": 1.0, "n_samples": 1000,
        "denoise_final": True,
    },
    "mine": {
        "rho": 0.8, "n": 25000, "a_columns": [0], "s_columns": [1], "batch_size": 256,
        "learning_rate": 1e-3, "iterations": 20000, "ema_rate": 0.001, "hidden": [64, 64], "holdout": 0.2,
    },
    "reorg": {"d": 2, "L": 11, "periodic": False, "k": 1, "r": 2},
    "fawzi-check": {"discrete": 1000, "gaussian": 500, "telescoping": 50},
}


def config_schema(experiment: str) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "experiment": {"const": experiment},
            "seed": {"type": "integer", "minimum": 0, "maximum": U64_MAX},
            "out": {"type": "string"},
            "plot": _bool,
            "params": PARAM_SCHEMAS[experiment],
        },
    }


SCHEMAS = {name: config_schema(name) for name in PARAM_SCHEMAS}


# -- outputs -------------------------------------------------------------------


@dataclass
class RunOutput:
    files: dict[str, str] = field(default_factory=dict)  # name -> text
    plots: list = field(default_factory=list)  # (name, callable(path))
    summary: str = ""


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return str(v)


def _csv_text(header, rows, footer=()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    for line in footer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


# -- experiments ---------------------------------------------------------------


def run_toric(p: dict, seed: int) -> RunOutput:
    code = TorusCode(p["L"])
    part = edge_tripartition(code, code.center_edge(), p["r"])
    rows = [(pp, p["r"], c) for pp, c in toric_cmi_sweep(code, p["ps"], part)]
    out = RunOutput()
    out.files["toric_cmi.csv"] = _csv_text(["p", "r", "cmi"], rows)
    if p["loop_samples"]:
        bits = sample_loops(code, p["loop_samples"], seed)
        out.files["loop_samples.txt"] = "".join("".join(map(str, row)) + "\n" for row in bits)
    ps, cs = [r[0] for r in rows], [r[2] for r in rows]
    out.plots.append(
        ("toric_cmi.svg", lambda path: line_chart(path, {f"r={p['r']}": (ps, cs)}, f"toric code L={p['L']}", "p", "I(A:C|B) [nats]"))
    )
    k = int(np.argmax(cs))
    out.summary = f"peak CMI {cs[k]:.6g} at p={ps[k]} (|B|={len(part.B)}, |C|={len(part.C)})"
    return out


def run_gauss_recovery(p: dict, seed: int) -> RunOutput:
    if p["d"] == 1:
        lat = Lattice(1, p["K"], periodic=p["periodic"])
        P0 = gmrf_chain(p["K"], p["coupling"], periodic=p["periodic"])
    else:
        L = math.isqrt(p["K"])
        if L * L != p["K"]:
            raise ConfigError(f"2D recovery needs a square site count, got K={p['K']}")
        lat = Lattice(2, L, periodic=p["periodic"])
        P0 = gmrf_grid(L, p["coupling"], periodic=p["periodic"])
    K, N = lat.K, p["N"]
    rs = sorted(set(p["rs"]))
    # Markov length of a partially noised state (the clean chain is exactly Markov)
    mid = push(forward_step(0.0, p["t_max"] / 2, K), P0)
    center = lat.site(tuple([lat.L // 2] * lat.d))
    fit_rs = list(range(lat.L // 2))
    sweep = cmi_sweep(mid, lat, center, fit_rs, p["k"])
    cmi_at = dict(zip(fit_rs, sweep))
    try:
        fit = markov_length_fit(fit_rs, sweep)
        xi, gamma = fit.xi, fit.gamma
    except ValueError:
        xi, gamma = math.nan, math.nan

    def bound(with_N: bool):
        if not math.isfinite(xi):
            return math.nan
        return required_radius(xi, N, K, p["eps"], gamma=max(gamma, 1e-300), with_N=with_N)

    rows, kls = [], []
    for r in rs + [max(K, lat.L)]:
        res = multi_step_local_recovery(P0, lat, N, r, k=p["k"], t_max=p["t_max"])
        c = cmi_at.get(r)
        if c is None:
            c = cmi_sweep(mid, lat, center, [r], p["k"])[0]
        rows.append((r, N, K, res.kl, c, xi, bound(True), bound(False)))
        kls.append(res.kl)
    monotone = all(b <= a * (1 + 1e-9) for a, b in zip(kls, kls[1:]))
    out = RunOutput()
    out.files["gauss_recovery.csv"] = _csv_text(
        ["r", "N", "K", "kl", "cmi", "xi", "r_bound", "r_bound_without_N"],
        rows,
        footer=[f"kl_monotone_decreasing_in_r={_fmt(monotone)}", f"full_buffer_kl={_fmt(kls[-1])}"],
    )
    plot_r = [row[0] for row in rows[:-1]]
    plot_kl = [math.log(max(row[3], 1e-300)) for row in rows[:-1]]
    out.plots.append(("gauss_recovery.svg", lambda path: line_chart(path, {"ln KL": (plot_r, plot_kl)}, f"K={K}, N={N}", "r", "ln KL")))
    out.summary = f"KL monotone in r: {monotone}; full buffer KL {kls[-1]:.3g}; xi {xi:.3g}"
    return out


def run_sample(p: dict, seed: int) -> RunOutput:
    lattice = None
    if "lattice" in p:
        lp = p["lattice"]
        lattice = Lattice(lp.get("d", 1), lp["L"], lp.get("periodic", False))
    try:
        data = Dataset.from_csv(p["dataset"], lattice) if "dataset" in p else Dataset(np.array(p["points"]), lattice)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from exc
    sched = NoiseSchedule(p["N"], p["t_min"], p["t_max"])
    cfg = SamplerConfig(
        eta=p["eta"], mode=p["mode"], r=p["r"], k=p["k"], intervals=tuple(map(tuple, p["intervals"])),
        seed=seed, n_samples=p["n_samples"], denoise_final=p["denoise_final"],
    )
    x = sample_backward(data, sched, cfg)
    out = RunOutput()
    out.files["samples.csv"] = _csv_text([f"x{j}" for j in range(data.K)], x)
    if data.K >= 2:
        out.plots.append(("samples.svg", lambda path: scatter_chart(path, x, f"{p['mode']} sampler, eta={p['eta']}", marks=data.samples)))
    d = np.min(np.linalg.norm(x[:, None, :] - data.samples[None], axis=-1), axis=1)
    out.summary = f"{np.mean(d <= 0.1):.1%} of {len(x)} samples within 0.1 of a data point"
    return out


def run_mine(p: dict, seed: int) -> RunOutput:
    cfg = MineConfig(
        batch_size=p["batch_size"], learning_rate=p["learning_rate"], iterations=p["iterations"],
        ema_rate=p["ema_rate"], seed=seed, hidden=tuple(p["hidden"]), holdout=p["holdout"],
    )
    if "samples" in p:
        try:
            data = read_samples_csv(p["samples"])
        except (OSError, ValueError, IndexError) as exc:
            raise ConfigError(f"cannot read samples: {exc}") from exc
        cols = p["a_columns"] + p["s_columns"]
        if max(cols) >= data.shape[1]:
            raise ConfigError(f"column index {max(cols)} out of range for {data.shape[1]} columns")
        xa, xs = data[:, p["a_columns"]], data[:, p["s_columns"]]
        source, exact, rho = p["samples"], math.nan, math.nan
    else:
        rho = p["rho"]
        if abs(rho) >= 1:
            raise ConfigError("rho must lie strictly inside (-1, 1)")
        rng = np.random.default_rng([seed, 1])
        z = rng.standard_normal((p["n"], 2))
        xa, xs = z[:, 0], rho * z[:, 0] + math.sqrt(1 - rho**2) * z[:, 1]
        source, exact = "gaussian", -0.5 * math.log1p(-(rho**2))
    res = train_mine(xa, xs, cfg)
    out = RunOutput()
    out.files["mine.csv"] = _csv_text(["source", "rho", "exact_mi", "estimate", "iterations"], [(source, rho, exact, res.estimate, cfg.iterations)])
    hist = res.train_history
    stride = max(1, len(hist) // 400)
    it = np.arange(len(hist))[::stride]
    smooth = np.convolve(hist, np.ones(stride) / stride, mode="same")[::stride]
    out.plots.append(("mine.svg", lambda path: line_chart(path, {"minibatch bound": (it, smooth)}, "MINE training", "iteration", "nats")))
    out.summary = f"MI estimate {res.estimate:.4f} nats" + ("" if math.isnan(exact) else f" (exact {exact:.4f})")
    return out


def run_reorg(p: dict, seed: int) -> RunOutput:
    if p["L"] < p["k"]:
        raise ConfigError(f"region size k={p['k']} exceeds L={p['L']}")
    lat = Lattice(p["d"], p["L"], periodic=p["periodic"])
    sched = reorganize(lat, p["k"], p["r"])
    problems = check_schedule(lat, sched)
    lines = [f"lattice d={lat.d} L={lat.L} periodic={lat.periodic} k={p['k']} r={p['r']}: {sched.M} sub-steps"]
    rows = []
    for i, step in enumerate(sched.substeps):
        lines.append(f"substep {i}: " + " ".join("{" + ",".join(map(str, R)) + "}" for R in step))
        for j, R in enumerate(step):
            rows.append((i, j, " ".join(map(str, R))))
    lines.append("valid" if not problems else "INVALID: " + "; ".join(problems))
    out = RunOutput()
    out.files["reorg.txt"] = "\n".join(lines) + "\n"
    out.files["reorg.csv"] = _csv_text(["substep", "region", "sites"], rows)
    out.summary = lines[0] + ("" if not problems else f" ({len(problems)} violations)")
    if problems:
        raise FloatingPointError("reorganized schedule violates its invariants: " + problems[0])
    return out


def run_fawzi_check(p: dict, seed: int) -> RunOutput:
    rows = []
    for c in discrete_recovery_checks(p["discrete"], seed):
        rows.append(("discrete", c.K, c.kl, c.tv, c.cmi_before, c.cmi_after, c.chain_ok, c.difference_ok))
    for c in gaussian_recovery_checks(p["gaussian"], seed):
        rows.append(("gaussian", c.K, c.kl, c.tv, c.cmi_before, c.cmi_after, c.chain_ok, c.difference_ok))
    tele = telescoping_checks(p["telescoping"], seed)
    out = RunOutput()
    out.files["fawzi_check.csv"] = _csv_text(["kind", "K", "kl", "tv", "cmi_before", "cmi_after", "chain_ok", "difference_ok"], rows)
    out.files["telescoping.csv"] = _csv_text(["K", "N", "r", "total_tv", "bound", "ok"], [(c.K, c.N, c.r, c.total_tv, c.bound, c.ok) for c in tele])
    bad = sum(not (r[6] and r[7]) for r in rows) + sum(not c.ok for c in tele)
    out.summary = f"{len(rows) + len(tele)} instances, {bad} violations"
    if bad:
        out.files["VIOLATIONS"] = out.summary + "\n"
    return out


RUNNERS = {
    "toric": run_toric,
    "gauss-recovery": run_gauss_recovery,
    "sample": run_sample,
    "mine": run_mine,
    "reorg": run_reorg,
    "fawzi-check": run_fawzi_check,
}


# -- driver --------------------------------------------------------------------


def load_config(experiment: str, path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMAS[experiment])
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"config {path}: {where}: {exc.message}") from exc
    return cfg


def run_experiment(experiment: str, cfg: dict, seed: int) -> RunOutput:
    user = cfg.get("params", {})
    if experiment == "sample" and "dataset" in user and "points" in user:
        raise ConfigError("give either 'dataset' or 'points', not both")
    params = {**DEFAULTS[experiment], **user}
    try:
        return RUNNERS[experiment](params, seed)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        if isinstance(exc, (SamplerDivergence, MineDivergence)):
            raise
        raise ConfigError(str(exc)) from exc


def _write(out_dir: str, result: RunOutput, manifest: dict, plot: bool) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, text in result.files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        written.append(path)
    if plot:
        for name, draw in result.plots:
            path = os.path.join(out_dir, name)
            draw(path)
            written.append(path)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localdenoise", description="Exact local-denoising experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "toric": "exact CMI sweep over flip probability for the toric code",
        "gauss-recovery": "multi-step local Gaussian recovery error versus buffer width",
        "sample": "training-free sampling with exact mixture scores",
        "mine": "neural mutual-information estimate",
        "reorg": "list the reorganized sub-step schedule",
        "fawzi-check": "randomized checks of the recovery error bounds",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--out", metavar="DIR", help="output directory (default: ./out/<command>)")
        p.add_argument("--seed", type=_u64, metavar="U64", help="random seed (default 0)")
        p.add_argument("--plot", action="store_true", default=None, help="also write SVG charts")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    exp = args.command
    try:
        cfg = load_config(exp, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    out_dir = args.out or cfg.get("out") or os.path.join("out", exp)
    plot = bool(args.plot if args.plot is not None else cfg.get("plot", False))
    params = {**DEFAULTS[exp], **cfg.get("params", {})}
    try:
        result = run_experiment(exp, cfg, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    manifest = {"experiment": exp, "seed": seed, "version": __version__, "params": params}
    written = _write(out_dir, result, manifest, plot)
    print(result.summary)
    for path in written:
        print(f"wrote {path}")
    return EXIT_NUMERIC if "VIOLATIONS" in result.files else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
