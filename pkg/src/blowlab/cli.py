"""Command line entry point.

Every subcommand reads an optional flat JSON config, lets explicit flags
override it, writes a JSON summary (sorted keys) and CSV tables into the
output directory, and exits 0 on success, 1 on a failed check and 2 on a
configuration error.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import click
import numpy as np

from .errors import BlowlabError, CheckFailure, ConfigurationError, DivergenceError, DomainError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

OUTPUT_ENV = "BLOWLAB_OUTPUT_DIR"
COMMANDS = ("geometry", "profile-check", "operator-check", "spectrum", "evolve")

PROFILE_TOL = 1e-7
DISSIPATIVITY_TOL = 1e-8
COMMUTATOR_TOL = 1e-6
SYMMETRY_TOL = 1e-6


@dataclass
class RunConfig:
    """Flat run description shared by all subcommands.

    R defaults to the light-cone radius of the height, N_check to N + 16,
    k to the smallest admissible order of the model and the fit window to
    the last four time units of the run.
    """

    command: str = "spectrum"
    model: str = "wm"
    d: int = 5
    n: int | None = None
    height: str = "standard"
    height_params: list = field(default_factory=list)
    N: int = 48
    N_check: int | None = None
    R: float | None = None
    k: int | None = None
    eps1: float = 0.5
    delta: float = 1e-3
    radius: float = 0.5
    family: str = "bump"
    T: float = 1.0
    tune: bool = False
    tau_max: float = 10.0
    dtau: float | None = None
    fit_window: list | None = None
    trials: int = 100
    seed: int = 0
    output_dir: str | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        data = {k.replace("-", "_"): v for k, v in data.items()}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigurationError(f"unknown config keys: {', '.join(extra)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if self.n is not None:
            if self.model.lower() not in ("ym", "yang-mills", "yang_mills", "yangmills"):
                raise ConfigurationError("n is only meaningful for Yang-Mills (d = n + 2)")
            self.d = int(self.n) + 2
        if self.N < 4:
            raise ConfigurationError("N must be at least 4")
        if self.N_check is not None and self.N_check <= self.N:
            raise ConfigurationError("N_check must exceed N")
        if self.tau_max <= 0:
            raise ConfigurationError("tau_max must be positive")
        if self.fit_window is not None and len(self.fit_window) != 2:
            raise ConfigurationError("fit_window needs two numbers")
        self.model_obj()
        self.height_obj()

    def model_obj(self):
        from .models import Model

        return Model(self.model, int(self.d))

    def height_obj(self):
        from .coords import HeightFunction

        return HeightFunction.from_spec(self.height, tuple(float(x) for x in self.height_params))

    def resolved_output(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or "blowlab-output")


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, complex to [re, im], non-finite to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(float(x.real)), _clean(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def dump_json(obj, path: Path):
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")


def dump_csv(header, rows, path: Path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow(["%.17g" % v if isinstance(v, (float, np.floating)) else v for v in row])


# runners return (summary, {name: (header, rows)}, passed)

def run_geometry(cfg: RunConfig):
    from .coords import (CoordChart, Event, from_physical, height_eval, image_slopes,
                         light_cone_radius, to_physical, validate_height)
    from .discretize import build_grid

    h = cfg.height_obj()
    chart = CoordChart(h, cfg.T, cfg.R)
    report = validate_height(h)
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for tau, rho in zip(rng.uniform(0.0, 3.0, 200), rng.uniform(0.0, chart.R, 200)):
        e = to_physical(chart, tau, rho)
        back = from_physical(chart, Event(e.t, e.r))
        worst = max(worst, abs(back[0] - tau), abs(back[1] - rho))
    g = build_grid(chart.R, cfg.N)
    h0, h1, h2, c, w = height_eval(h, g.rho)
    summary = {
        "height": h.describe(),
        "light_cone_radius": light_cone_radius(h),
        "R": chart.R,
        "T": chart.T,
        "validation": report.to_dict(),
        "roundtrip_error": worst,
        "image_slopes": dict(zip(("kappa", "kappa_R"), image_slopes(h, chart.R))),
    }
    rows = list(zip(g.rho, h0, h1, h2, c, w))
    passed = report.passed and worst < 1e-10
    return summary, {"height": (["rho", "h", "dh", "d2h", "c", "w"], rows)}, passed


def run_profile(cfg: RunConfig):
    from .coords import CoordChart
    from .discretize import build_grid
    from .linops import profile_residual
    from .models import potential, potential_explicit

    m, h = cfg.model_obj(), cfg.height_obj()
    chart = CoordChart(h, 1.0, cfg.R)
    g = build_grid(chart.R, cfg.N)
    res = profile_residual(g, m, h)
    rho = np.linspace(0.0, chart.R, 1001)[1:]
    pot = float(np.max(np.abs(potential(m, h, rho) - potential_explicit(m, h, rho))))
    summary = {
        **m.describe(),
        "height": h.describe(),
        "N": cfg.N,
        "R": chart.R,
        "residual": float(np.max(np.abs(res))),
        "potential_deviation": pot,
        "tolerance": PROFILE_TOL,
    }
    passed = summary["residual"] < PROFILE_TOL
    summary["passed"] = passed
    return summary, {"residual": (["rho", "residual"], list(zip(g.rho, res)))}, passed


def run_operator(cfg: RunConfig):
    from .coords import CoordChart
    from .discretize import build_grid
    from .linops import commutator_defect, dissipativity_check
    from .spectrum import verify_symmetry_eigenpair

    m, h = cfg.model_obj(), cfg.height_obj()
    chart = CoordChart(h, 1.0, cfg.R)
    g = build_grid(chart.R, cfg.N)
    k = cfg.k if cfg.k is not None else m.k_min
    tests = [lambda r: (r**2, 1.0 + 0.0 * r), lambda r: (1.0 + 0.0 * r, r**4)]
    comm = commutator_defect(g, m, h, tests)
    diss = dissipativity_check(g, m, h, k, cfg.eps1, trials=cfg.trials, seed=cfg.seed)
    sym = verify_symmetry_eigenpair(g, m, h, k=k, eps1=cfg.eps1)
    summary = {
        **m.describe(),
        "height": h.describe(),
        "N": cfg.N,
        "k": k,
        "commutator": comm,
        "dissipativity": diss,
        "symmetry_residual": sym,
    }
    checks = {
        "commutator": comm["max"] < COMMUTATOR_TOL,
        "dissipativity": diss["max_violation"] <= DISSIPATIVITY_TOL,
        "symmetry": sym < SYMMETRY_TOL,
    }
    summary["checks"] = checks
    passed = all(checks.values())
    summary["passed"] = passed
    return summary, {}, passed


def run_spectrum(cfg: RunConfig):
    from .coords import CoordChart
    from .discretize import build_grid
    from .spectrum import solve_spectrum

    m, h = cfg.model_obj(), cfg.height_obj()
    chart = CoordChart(h, 1.0, cfg.R)
    g = build_grid(chart.R, cfg.N)
    rep = solve_spectrum(g, m, h, N_check=cfg.N_check)
    summary = {**m.describe(), "height": h.describe(), "R": chart.R, **rep.to_dict()}
    passed = abs(rep.lambda_sym - 1.0) < 1e-6 and rep.simple
    summary["passed"] = passed
    order = np.argsort(-rep.eigenvalues.real, kind="stable")
    rows = [(float(rep.eigenvalues[i].real), float(rep.eigenvalues[i].imag), int(rep.trusted[i]))
            for i in order]
    n = g.n
    modes = [(float(r), float(np.real(a)), float(np.real(b)), float(np.real(c)), float(np.real(d)))
             for r, a, b, c, d in zip(g.rho, rep.f1[:n], rep.f1[n:], rep.g1[:n], rep.g1[n:])]
    return summary, {"eigenvalues": (["re", "im", "trusted"], rows),
                     "modes": (["rho", "f1_1", "f1_2", "g1_1", "g1_2"], modes)}, passed


def run_evolve(cfg: RunConfig):
    from .coords import CoordChart
    from .discretize import build_grid
    from .evolve import (PerturbationSpec, decay_rate, finite_speed_check, initial_data, integrate,
                         tune_blowup_time, unstable_pair)
    from .linops import assemble_L

    m, h = cfg.model_obj(), cfg.height_obj()
    chart = CoordChart(h, 1.0, cfg.R)
    g = build_grid(chart.R, cfg.N)
    p = PerturbationSpec(cfg.family, cfg.delta, cfg.radius)
    L = assemble_L(g, m, h)
    pair = unstable_pair(g, m, h, L)
    summary = {**m.describe(), "height": h.describe(), "N": cfg.N, "R": chart.R,
               "perturbation": asdict(p), "tau_max": cfg.tau_max, "tuned": cfg.tune}
    try:
        if cfg.tune:
            T, traj = tune_blowup_time(m, chart, p, g, cfg.tau_max, dtau=cfg.dtau, pair=pair, k=cfg.k)
            summary["tuning"] = traj.meta["tuning"]
        else:
            T = cfg.T
            u0 = initial_data(m, chart, p, T, g)
            traj = integrate(L, m, h, g, u0, cfg.tau_max, cfg.dtau, nonlinear=True, k=cfg.k,
                             g1=pair[2], T=T)
    except DivergenceError as err:
        summary["diverged_at"] = err.tau
        summary["passed"] = False
        traj = getattr(err, "trajectory", None)
        tables = {}
        if traj is not None and len(traj):
            tables["trajectory"] = (["tau", "energy", "hnorm", "projection", "sup"], traj.rows())
        return summary, tables, False
    window = cfg.fit_window or [max(0.0, cfg.tau_max - 4.0), cfg.tau_max]
    omega = decay_rate(traj, tuple(window))
    fs = finite_speed_check(traj, chart, m, p)
    summary.update({
        "T": T,
        "dtau": traj.dtau,
        "k": traj.k,
        "fit_window": list(window),
        "omega_fit": omega,
        "finite_speed": asdict(fs),
        "final_hnorm": float(traj.hnorm[-1]),
    })
    passed = omega > 0 if cfg.tune else True
    summary["passed"] = passed
    return summary, {"trajectory": (["tau", "energy", "hnorm", "projection", "sup"], traj.rows())}, passed


RUNNERS = {
    "geometry": run_geometry,
    "profile-check": run_profile,
    "operator-check": run_operator,
    "spectrum": run_spectrum,
    "evolve": run_evolve,
}


def execute(cfg: RunConfig, out: Path | None = None):
    """Run one config and write its artifacts; returns (exit code, summary)."""
    out = Path(out) if out is not None else cfg.resolved_output()
    try:
        cfg.validate()
        summary, tables, passed = RUNNERS[cfg.command](cfg)
    except (ConfigurationError, DomainError) as err:
        return EXIT_CONFIG, {"command": cfg.command, "error": str(err), "exit_code": EXIT_CONFIG}
    except (CheckFailure, BlowlabError) as err:
        summary, tables, passed = {"error": str(err)}, {}, False
    code = EXIT_OK if passed else EXIT_FAIL
    summary = {"command": cfg.command, "config": asdict(cfg) | {"output_dir": None}, **summary,
               "exit_code": code}
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.command.replace("-", "_")
    dump_json(summary, out / f"{stem}.json")
    for name, (header, rows) in tables.items():
        dump_csv(header, rows, out / f"{stem}_{name}.csv")
    return code, summary


def _sweep_child(args):
    data, out = args
    cfg = RunConfig.from_mapping(data)
    return execute(cfg, out)


def run_sweep(configs: list, out: Path, workers: int | None = None):
    """Run configs in worker processes; summaries keep the input order."""
    if not configs:
        raise ConfigurationError("sweep needs at least one config")
    for c in configs:
        RunConfig.from_mapping(c)
    jobs = [(c, out / f"run_{i:03d}") for i, c in enumerate(configs)]
    workers = workers or min(len(jobs), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_sweep_child, jobs))
    codes = [code for code, _ in results]
    summaries = [dict(s, index=i) for i, (_, s) in enumerate(results)]
    out.mkdir(parents=True, exist_ok=True)
    dump_json(summaries, out / "sweep.json")
    return max(codes), summaries


# click layer

def _load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigurationError(f"cannot read config {path}: {err}")
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold one JSON object")
    return data


def _common(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="Flat JSON config; flags override its values."),
        click.option("--model", default=None, help="wm or ym."),
        click.option("--d", "d", type=int, default=None, help="Spatial dimension."),
        click.option("--n", "n", type=int, default=None, help="Yang-Mills index, d = n + 2."),
        click.option("--height", default=None, help="standard, hyperboloidal or flattened_cone."),
        click.option("--height-params", default=None, help="Comma separated height parameters."),
        click.option("--N", "N", type=int, default=None, help="Chebyshev degree."),
        click.option("--N-check", "N_check", type=int, default=None),
        click.option("--R", "R", type=float, default=None, help="Grid radius (default: light cone)."),
        click.option("--k", type=int, default=None, help="Energy order."),
        click.option("--eps1", type=float, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--output-dir", default=None, help=f"Artifact directory (env {OUTPUT_ENV})."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _build(command, config_path, **flags):
    data = _load_config(config_path)
    data.pop("command", None)
    if flags.get("height_params") is not None and isinstance(flags["height_params"], str):
        flags["height_params"] = [float(x) for x in flags["height_params"].split(",") if x.strip()]
    if flags.get("fit_window") is not None and isinstance(flags["fit_window"], str):
        flags["fit_window"] = [float(x) for x in flags["fit_window"].split(",")]
    data.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig.from_mapping({**data, "command": command})


def _finish(command, config_path, flags):
    try:
        cfg = _build(command, config_path, **flags)
    except (ConfigurationError, DomainError, TypeError, ValueError) as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    code, summary = execute(cfg)
    click.echo(json.dumps(_clean(summary), sort_keys=True, indent=2))
    if code == EXIT_CONFIG:
        click.echo(f"error: {summary.get('error')}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Self-similar blowup stability experiments for wave maps and Yang-Mills."""


@main.command()
@_common
@click.option("--T", "T", type=float, default=None, help="Blowup time of the chart.")
def geometry(config_path, **flags):
    """Light-cone radius, height checks and chart round trip."""
    _finish("geometry", config_path, flags)


@main.command("profile-check")
@_common
def profile_check(config_path, **flags):
    """Residual of the self-similar profile in the chosen chart."""
    _finish("profile-check", config_path, flags)


@main.command("operator-check")
@_common
@click.option("--trials", type=int, default=None)
def operator_check(config_path, **flags):
    """Commutator, dissipativity and symmetry-mode diagnostics."""
    _finish("operator-check", config_path, flags)


@main.command()
@_common
def spectrum(config_path, **flags):
    """Discrete spectrum of the linearized generator."""
    _finish("spectrum", config_path, flags)


@main.command()
@_common
@click.option("--delta", type=float, default=None, help="Perturbation amplitude.")
@click.option("--radius", type=float, default=None, help="Perturbation support radius.")
@click.option("--family", type=click.Choice(["bump", "gaussian", "zero"]), default=None)
@click.option("--T", "T", type=float, default=None, help="Blowup time for untuned runs.")
@click.option("--tune/--no-tune", default=None, help="Tune T so the unstable mode vanishes at tau_max.")
@click.option("--tau-max", type=float, default=None)
@click.option("--dtau", type=float, default=None)
@click.option("--fit-window", default=None, help="tau1,tau2 of the decay fit.")
def evolve(config_path, **flags):
    """Nonlinear evolution of perturbed self-similar data."""
    _finish("evolve", config_path, flags)


@main.command()
@click.argument("configs", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", default=None, help=f"Artifact directory (env {OUTPUT_ENV}).")
@click.option("--workers", type=int, default=None)
def sweep(configs, output_dir, workers):
    """Run a JSON list of configs concurrently and merge the summaries."""
    try:
        data = json.loads(Path(configs).read_text())
        if not isinstance(data, list):
            raise ConfigurationError("sweep file must hold a JSON list of configs")
        out = Path(output_dir or os.environ.get(OUTPUT_ENV) or "blowlab-output")
        code, summaries = run_sweep(data, out, workers)
    except (ConfigurationError, json.JSONDecodeError, TypeError) as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(json.dumps(_clean(summaries), sort_keys=True, indent=2))
    sys.exit(code)


if __name__ == "__main__":
    main()
