"""Command-line experiment runner.

Every command resolves a JSON configuration (defaults, then a preset or
config file, then ``--seed`` / ``--trials``), writes it to
``<out>/config.resolved.json``, produces CSV outputs and finishes with a
``manifest.json`` listing seeds, library versions and output checksums.
Feeding the resolved config back through ``--config`` reproduces the
outputs byte for byte, whatever ``--jobs`` is.

Exit codes: 0 success, 1 validation failures, 2 invalid configuration,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import platform
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bound import pstab_for_network
from .dynamics import MismatchDistribution, VanDerPol, detect_period, integrate_network, sample_mismatch
from .errors import InvalidParameterError, SyncProbError
from .montecarlo import SWEEP_AXES, TrialConfig, run_trials, sweep, sweep_to_csv
from .msf import msf_curve
from .netgen import build_graph, is_connected
from .spectral import symmetric_eig
from .validation import run_suite

EXIT_OK, EXIT_VALIDATE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

GRAPH_MODELS = ("ring", "er", "nw")
COMMANDS = ("msf", "trajectory", "pstab-heatmap", "pstab-vs-n", "pstab-vs-eps", "mc-sweep", "validate")

DEFAULTS = {
    "version": 1,
    "seed": 0,
    "epsilon": 0.4,
    "network": {"model": "ring", "n": 100, "k": 6},
    "model": {"gamma_bar": 1.0, "theta_bar": [1.0, 0.0]},
    "mismatch": {"sigma_gamma": 0.1, "sigma_theta1": 0.1, "sigma_theta2": 0.1},
    "integrator": {"rtol": 1e-9, "atol": 1e-9},
    "cycle": {"t_transient": 100.0, "samples": 2048},
    "msf": {"mu_min": 0.0, "mu_max": 15.0, "points": 151, "steps_per_period": 200, "coarse_step": 1.0},
    "trajectory": {"t_end": 300.0, "samples_per_period": 200, "node": 0, "ic_spread": 0.1},
    "heatmap": {"sigma_gamma": {"linspace": [0.0, 8e-4, 41]}, "sigma_theta2": {"linspace": [0.0, 8e-4, 41]}},
    "vs_n": {
        "n": {"range": [10, 120, 10]},
        "replicates": 10,
        "networks": [
            {"name": "ring", "model": "ring", "k": 10},
            {"name": "er", "model": "er", "p": 0.1},
            {"name": "nw", "model": "nw", "k": 6, "p": 0.4167},
        ],
    },
    "vs_eps": {
        "epsilon": {"geomspace": [0.03, 300.0, 41]},
        "networks": [
            {"name": "ring", "model": "ring", "n": 100, "k": 10},
            {"name": "er", "model": "er", "n": 100, "p": 0.1},
            {"name": "nw", "model": "nw", "n": 100, "k": 6, "p": 0.4167},
        ],
    },
    "mc": {
        "trials": 500,
        "t_end": 100.0,
        "window_periods": 5.0,
        "samples_per_period": 200,
        "ic_spread": 0.1,
        "resample_graph": True,
        "axis": "epsilon",
        "grid": {"linspace": [0.4, 2.5, 8]},
        "bound": True,
    },
}

SECTIONS = ("network", "model", "mismatch", "integrator", "cycle", "msf", "trajectory", "heatmap", "vs_n", "vs_eps", "mc")
WHOLE = ("network",)


class ConfigError(InvalidParameterError):
    pass


# configuration -----------------------------------------------------------


def _read_config(ref: str | None) -> dict:
    if ref is None:
        return {}
    path = Path(ref)
    if not path.exists():
        preset = resources.files("syncprob") / "presets" / f"{ref}.json"
        if not preset.is_file():
            raise ConfigError(f"no config file or preset named {ref!r}")
        text = preset.read_text()
    else:
        text = path.read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    return obj


def resolve_config(user: dict, seed=None, trials=None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    for key, value in user.items():
        if key == "command":
            continue
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r}")
        if key in SECTIONS and key not in WHOLE:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be an object")
            unknown = set(value) - set(cfg[key])
            if unknown:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(unknown)}")
            cfg[key].update(copy.deepcopy(value))
        else:
            cfg[key] = copy.deepcopy(value)
    if cfg["version"] != 1:
        raise ConfigError(f"unsupported config version {cfg['version']!r}")
    if seed is not None:
        cfg["seed"] = seed
    if trials is not None:
        cfg["mc"]["trials"] = trials
    if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    nets = [cfg["network"], *cfg["vs_n"]["networks"], *cfg["vs_eps"]["networks"]]
    for net in nets:
        if not isinstance(net, dict) or net.get("model") not in GRAPH_MODELS:
            raise ConfigError(f"network model must be one of {GRAPH_MODELS}: {net!r}")
    if cfg["mc"]["axis"] not in SWEEP_AXES:
        raise ConfigError(f"mc axis must be one of {SWEEP_AXES}")
    return cfg


def grid_values(spec) -> np.ndarray:
    """Grid from a list or ``{"linspace"|"geomspace": [a, b, n]}`` / ``{"range": [a, b, step]}`` (inclusive)."""
    if isinstance(spec, (int, float)):
        return np.array([float(spec)])
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if isinstance(spec, dict) and len(spec) == 1:
        (kind, args), = spec.items()
        if kind == "linspace":
            return np.linspace(float(args[0]), float(args[1]), int(args[2]))
        if kind == "geomspace":
            return np.geomspace(float(args[0]), float(args[1]), int(args[2]))
        if kind == "range":
            a, b, step = (float(v) for v in args)
            count = int(math.floor((b - a) / step + 1e-9)) + 1
            return a + step * np.arange(count)
    raise ConfigError(f"bad grid specification {spec!r}")


def _dist(cfg) -> MismatchDistribution:
    m, s = cfg["model"], cfg["mismatch"]
    return MismatchDistribution.vanderpol(
        s["sigma_gamma"], s["sigma_theta1"], s["sigma_theta2"],
        gamma_bar=m["gamma_bar"], theta_bar=tuple(m["theta_bar"]),
    )


def _tag(net: dict, seed: int, n=None) -> dict:
    tag = {k: v for k, v in net.items() if k != "name"}
    if n is not None:
        tag["n"] = int(n)
    if tag.get("model") in ("er", "nw"):
        tag.setdefault("seed", seed)
    return tag


def _sub_seed(*keys) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0])


class _Context:
    """Shared numerics for one run: the model, cycles keyed by drift, MSF curves."""

    def __init__(self, cfg, jobs):
        self.cfg = cfg
        self.jobs = jobs
        self.model = VanDerPol()
        self.dist = _dist(cfg)
        self._cycles = {}

    def cycle(self, d_in_bar=0.0):
        m = self.cfg["model"]
        gamma_bar, theta_bar = np.atleast_1d(m["gamma_bar"]), np.asarray(m["theta_bar"], dtype=float)
        probe = self.model.default_initial_state()
        drift = self.model.h(probe, probe, theta_bar)
        key = 0.0 if not np.any(drift) else round(float(d_in_bar), 12)
        if key not in self._cycles:
            c = self.cfg["cycle"]
            self._cycles[key] = detect_period(
                self.model, gamma_bar, theta_bar, key, t_transient=c["t_transient"], n_samples=c["samples"]
            )
        return self._cycles[key]

    def curve_for(self, mu_needed, cycle):
        """MSF curve on a fine grid to ``mu_max`` and a coarse one beyond, covering ``mu_needed``."""
        m = self.cfg["msf"]
        fine = np.linspace(m["mu_min"], m["mu_max"], m["points"])
        top = max(float(mu_needed), fine[-1])
        coarse = fine[-1] + m["coarse_step"] * np.arange(1, int(math.ceil((top - fine[-1]) / m["coarse_step"])) + 1)
        grid = np.concatenate([fine, coarse])
        return msf_curve(self.model, cycle, grid, jobs=self.jobs, steps_per_period=m["steps_per_period"])


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _f(v) -> float:
    return float(v)


# commands ------------------------------------------------------------------


def cmd_msf(ctx: _Context, out: Path):
    cycle = ctx.cycle()
    m = ctx.cfg["msf"]
    grid = np.linspace(m["mu_min"], m["mu_max"], m["points"])
    curve = msf_curve(ctx.model, cycle, grid, jobs=ctx.jobs, steps_per_period=m["steps_per_period"])
    curve.to_csv(out / "msf.csv")
    info = {"period": cycle.period, "s0": cycle.s0.tolist()}
    (out / "cycle.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return ["msf.csv", "cycle.json"]


def cmd_trajectory(ctx: _Context, out: Path):
    cfg, tr = ctx.cfg, ctx.cfg["trajectory"]
    g = build_graph(_tag(cfg["network"], cfg["seed"]))
    cycle = ctx.cycle(float(g.degrees.mean()))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg["seed"], 0, 0])))
    sample = sample_mismatch(ctx.dist, g, rng)
    x0 = cycle.s0 + rng.uniform(-tr["ic_spread"], tr["ic_spread"], size=(g.n, ctx.model.state_dim))
    rec = integrate_network(
        g, ctx.model, sample, x0, tr["t_end"], sample_dt=cycle.period / tr["samples_per_period"],
        rtol=cfg["integrator"]["rtol"], atol=cfg["integrator"]["atol"], store_states=True,
    )
    node = int(tr["node"])
    if not 0 <= node < g.n:
        raise ConfigError(f"trajectory node {node} outside 0..{g.n - 1}")
    rows = (
        (_f(t), _f(s[0]), _f(s[1]), _f(x[0]), _f(x[1]), _f(e))
        for t, s, x, e in zip(rec.times, rec.manifold, rec.states[:, node], rec.err_norm)
    )
    _write_csv(out / "trajectory.csv", ["t", "s1", "s2", f"x{node}_1", f"x{node}_2", "err_norm"], rows)
    return ["trajectory.csv"]


def cmd_pstab_heatmap(ctx: _Context, out: Path):
    cfg = ctx.cfg
    g = build_graph(_tag(cfg["network"], cfg["seed"]))
    spec = symmetric_eig(g.laplacian())
    cycle = ctx.cycle(float(g.degrees.mean()))
    curve = ctx.curve_for(spec.eigenvalues[-1], cycle)
    sg_grid = grid_values(cfg["heatmap"]["sigma_gamma"])
    st_grid = grid_values(cfg["heatmap"]["sigma_theta2"])
    rows = []
    for sg in sg_grid:
        for st in st_grid:
            s = dict(cfg["mismatch"], sigma_gamma=float(sg), sigma_theta2=float(st))
            dist = _dist({**cfg, "mismatch": s})
            r = pstab_for_network(g, spec, curve, dist, cycle, cfg["epsilon"])
            rows.append((_f(sg), _f(st), _f(r.sigma), _f(r.pstab_lb)))
    _write_csv(out / "pstab_heatmap.csv", ["sigma_gamma", "sigma_theta2", "sigma", "pstab_lb"], rows)
    return ["pstab_heatmap.csv"]


def _valid_size(tag) -> bool:
    k = tag.get("k")
    return k is None or int(k) < int(tag["n"])


def cmd_pstab_vs_n(ctx: _Context, out: Path):
    cfg, vn = ctx.cfg, ctx.cfg["vs_n"]
    sizes = [int(round(v)) for v in grid_values(vn["n"])]
    cycle = ctx.cycle()
    plan = []
    mu_top = 0.0
    for ni, net in enumerate(vn["networks"]):
        reps = 1 if net["model"] == "ring" else int(vn["replicates"])
        for n in sizes:
            for r in range(reps):
                tag = _tag(net, _sub_seed(cfg["seed"], ni, n, r), n)
                if not _valid_size(tag):
                    continue
                g = build_graph(tag)
                spec = symmetric_eig(g.laplacian()) if is_connected(g) else None
                if spec is not None:
                    mu_top = max(mu_top, spec.eigenvalues[-1])
                plan.append((net.get("name", net["model"]), n, r, tag, g, spec))
    curve = ctx.curve_for(mu_top, cycle)
    detail, summary = [], {}
    for name, n, r, tag, g, spec in plan:
        res = pstab_for_network(g, spec, curve, ctx.dist, cycle, cfg["epsilon"], on_disconnected="zero")
        mu2 = float(spec.eigenvalues[1]) if spec is not None else 0.0
        detail.append((name, n, r, tag.get("seed", ""), int(spec is not None), _f(mu2), _f(res.sigma), _f(res.pstab_lb)))
        summary.setdefault((name, n), []).append((res.pstab_lb, spec is not None))
    _write_csv(
        out / "pstab_vs_n_replicates.csv",
        ["network", "n", "replicate", "graph_seed", "connected", "mu2", "sigma", "pstab_lb"], detail,
    )
    mc = cfg["mc"]
    rows = []
    for (name, n), vals in summary.items():
        row = [name, n, _f(np.mean([v for v, _ in vals])), _f(np.mean([c for _, c in vals]))]
        if mc["trials"] > 0:
            net = next(x for x in vn["networks"] if x.get("name", x["model"]) == name)
            tc = _trial_config(ctx, _tag(net, cfg["seed"], n), (cfg["epsilon"],))
            res = run_trials(tc, jobs=ctx.jobs, point=n, cycle=cycle)
            lo, hi = res.wilson
            row += [_f(res.p_hat[0]), _f(lo[0]), _f(hi[0])]
        rows.append(row)
    header = ["network", "n", "pstab_lb", "connected_fraction"]
    if mc["trials"] > 0:
        header += ["p_hat", "wilson_lo", "wilson_hi"]
    _write_csv(out / "pstab_vs_n.csv", header, rows)
    return ["pstab_vs_n.csv", "pstab_vs_n_replicates.csv"]


def _trial_config(ctx: _Context, tag, epsilons) -> TrialConfig:
    cfg, mc = ctx.cfg, ctx.cfg["mc"]
    return TrialConfig(
        graph=tag, dist=ctx.dist, epsilons=tuple(epsilons), t_end=mc["t_end"], window_periods=mc["window_periods"],
        trials=int(mc["trials"]), seed=cfg["seed"], resample_graph=bool(mc["resample_graph"]),
        ic_spread=mc["ic_spread"], samples_per_period=int(mc["samples_per_period"]),
        rtol=cfg["integrator"]["rtol"], atol=cfg["integrator"]["atol"], model=ctx.model,
    )


def cmd_pstab_vs_eps(ctx: _Context, out: Path):
    cfg, ve = ctx.cfg, ctx.cfg["vs_eps"]
    eps = grid_values(ve["epsilon"])
    cycle = ctx.cycle()
    graphs = []
    for net in ve["networks"]:
        tag = _tag(net, cfg["seed"])
        g = build_graph(tag)
        graphs.append((net.get("name", net["model"]), tag, g))
    mu_top = max(symmetric_eig(g.laplacian()).eigenvalues[-1] for _, _, g in graphs)
    curve = ctx.curve_for(mu_top, cycle)
    rows = []
    for name, tag, g in graphs:
        spec = symmetric_eig(g.laplacian()) if is_connected(g) else None
        lb = [pstab_for_network(g, spec, curve, ctx.dist, cycle, e, on_disconnected="zero").pstab_lb for e in eps]
        if cfg["mc"]["trials"] > 0:
            mc_rows = sweep(_trial_config(ctx, tag, eps), "epsilon", eps, jobs=ctx.jobs)
        else:
            mc_rows = [None] * len(eps)
        for e, b, m in zip(eps, lb, mc_rows):
            extra = [math.nan, math.nan, math.nan, 0, 0] if m is None else [m.p_hat, m.wilson_lo, m.wilson_hi, m.trials, m.divergences]
            rows.append([name, _f(e), _f(b)] + [_f(v) if isinstance(v, float) else v for v in extra])
    _write_csv(out / "pstab_vs_eps.csv", ["network", "epsilon", "pstab_lb", "p_hat", "wilson_lo", "wilson_hi", "trials", "divergences"], rows)
    return ["pstab_vs_eps.csv"]


def cmd_mc_sweep(ctx: _Context, out: Path):
    cfg, mc = ctx.cfg, ctx.cfg["mc"]
    grid = grid_values(mc["grid"])
    tag = _tag(cfg["network"], cfg["seed"])
    tc = _trial_config(ctx, tag, (cfg["epsilon"],))
    curve = None
    if mc["bound"]:
        cycle = ctx.cycle()
        top = 0.0
        sizes = grid if mc["axis"] == "n" else [tag["n"]]
        for n in sizes:
            g = build_graph({**tag, "n": int(n)})
            if is_connected(g):
                top = max(top, symmetric_eig(g.laplacian()).eigenvalues[-1])
        curve = ctx.curve_for(top, cycle)
    rows = sweep(tc, mc["axis"], grid, jobs=ctx.jobs, curve=curve)
    sweep_to_csv(rows, mc["axis"], out / "mc_sweep.csv")
    return ["mc_sweep.csv"]


HANDLERS = {
    "msf": cmd_msf,
    "trajectory": cmd_trajectory,
    "pstab-heatmap": cmd_pstab_heatmap,
    "pstab-vs-n": cmd_pstab_vs_n,
    "pstab-vs-eps": cmd_pstab_vs_eps,
    "mc-sweep": cmd_mc_sweep,
}


def cmd_validate(out: Path | None) -> int:
    rows = run_suite()
    width = max(len(r[0]) for r in rows)
    for name, ok, detail, secs in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {secs:6.2f}s  {detail}")
    failed = sum(not r[1] for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} properties passed")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "validate.csv", ["property", "passed", "detail"], [(n, int(ok), d) for n, ok, d, _ in rows])
    return EXIT_OK if failed == 0 else EXIT_VALIDATE


# entry point -------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(command, cfg, out: Path, files) -> dict:
    return {
        "command": command,
        "seed": cfg["seed"],
        "config": "config.resolved.json",
        "replay": f"syncprob {command} --config config.resolved.json --out <dir>",
        "versions": {
            "syncprob": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": {name: _sha256(out / name) for name in files},
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="syncprob", description="Synchronization probability experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="config file path or preset name")
    p.add_argument("--out", help="output directory (default: runs/<command>)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (outputs do not depend on it)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per grid point")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(Path(args.out) if args.out else None)
    out = Path(args.out or Path("runs") / args.command)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if args.trials is not None and args.trials < 0:
            raise ConfigError("--trials must be nonnegative")
        cfg = resolve_config(_read_config(args.config), seed=args.seed, trials=args.trials)
        ctx = _Context(cfg, args.jobs)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.resolved.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        files = HANDLERS[args.command](ctx, out)
        manifest = _manifest(args.command, cfg, out, ["config.resolved.json", *files])
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except (InvalidParameterError, KeyError, TypeError) as exc:
        print(f"syncprob: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SyncProbError as exc:
        print(f"syncprob: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {', '.join(files)} to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
