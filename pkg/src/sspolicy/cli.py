"""Command-line front end.

Problems are described by small versioned text configs (see `parse_config`);
a few ready-made ones ship inside the package and can be named directly,
e.g. ``sspolicy solve -c example3_1``.

Exit codes: 0 success, 1 bad usage or an invalid problem, 2 numerical
failure inside the solver or an oracle.
"""

import json
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import click

from . import __version__
from .bounds import certify
from .grid import Grid
from .oracle import DiscretePmf, OracleError, simulate_policy
from .problem import (
    Gamma,
    InventoryProblem,
    PeriodParams,
    PiecewiseCdf,
    TruncatedNormal,
    Uniform,
    validate,
)
from .solver import SolverError, solve_policy

_HEADER = "sspolicy-config 1"

# reserve exit code 2 for numerical failures
click.UsageError.exit_code = 1


class NumericalFailure(click.ClickException):
    exit_code = 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: InventoryProblem
    theta: float
    x0: float = 0.0
    seed: int = 0
    reps: int = 100_000
    theta_ref: float | None = None


def _split_pairs(text, what):
    out = []
    for item in text.split(","):
        a, sep, b = item.partition(":")
        if not sep:
            raise ConfigError(f"malformed {what} entry {item!r} (want a:b)")
        try:
            out.append((float(a), float(b)))
        except ValueError:
            raise ConfigError(f"bad numbers in {what} entry {item!r}") from None
    return out


def _parse_demand(tokens):
    if not tokens:
        raise ConfigError("period row is missing a demand spec")
    kind = tokens[0]
    kw = {}
    for tok in tokens[1:]:
        k, sep, v = tok.partition("=")
        if not sep:
            raise ConfigError(f"malformed demand token {tok!r}")
        kw[k] = v

    def take(key, conv=float):
        if key not in kw:
            raise ConfigError(f"{kind} demand is missing {key}=")
        raw = kw.pop(key)
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"bad {key}= value {raw!r} in {kind} demand") from None

    try:
        if kind == "tnormal":
            model = TruncatedNormal(mu=take("mu"), sigma=take("sigma"))
        elif kind == "uniform":
            model = Uniform(b=take("b"))
        elif kind == "gamma":
            shape = take("shape")
            if ("rate" in kw) == ("mean" in kw):
                raise ConfigError("gamma demand needs exactly one of rate= or mean=")
            rate = take("rate") if "rate" in kw else shape / take("mean")
            model = Gamma(shape=shape, rate=rate)
        elif kind == "empirical":
            pairs = _split_pairs(take("knots", str), "knots")
            model = PiecewiseCdf([x for x, _ in pairs], [F for _, F in pairs])
        elif kind == "pmf":
            pairs = _split_pairs(take("table", str), "table")
            model = DiscretePmf(tuple(v for v, _ in pairs), tuple(p for _, p in pairs))
        else:
            raise ConfigError(f"unknown demand kind {kind!r}")
    except ConfigError:
        raise
    except ValueError as e:  # model constructors reject bad parameters
        raise ConfigError(f"bad {kind} demand: {e}") from None
    if kw:
        raise ConfigError(f"unknown {kind} demand options: {sorted(kw)}")
    return model


_SCALARS = {
    "alpha": float,
    "salvage": float,
    "theta": float,
    "x0": float,
    "seed": int,
    "reps": int,
    "theta_ref": float,
}


def parse_config(text):
    """Parse the versioned problem format into a RunConfig."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines or lines[0] != _HEADER:
        raise ConfigError(f"config must start with {_HEADER!r}")
    kv = {}
    rows = []
    in_periods = False
    for line in lines[1:]:
        if line == "periods:":
            in_periods = True
            continue
        if not in_periods:
            if "=" not in line:
                raise ConfigError(f"expected key = value, got {line!r}")
            k, v = (part.strip() for part in line.split("=", 1))
            if k not in _SCALARS:
                raise ConfigError(f"unknown config key {k!r}")
            try:
                kv[k] = _SCALARS[k](v)
            except ValueError:
                raise ConfigError(f"bad value for {k}: {v!r}") from None
        else:
            tok = line.split()
            if len(tok) < 6:
                raise ConfigError(f"period row needs t c h p K demand...: {line!r}")
            if int(tok[0]) != len(rows):
                raise ConfigError(f"period rows must be numbered in order: {line!r}")
            try:
                c, h, p, K = (float(v) for v in tok[1:5])
            except ValueError:
                raise ConfigError(f"bad period numbers in {line!r}") from None
            rows.append(PeriodParams(c=c, h=h, p=p, K=K, demand=_parse_demand(tok[5:])))
    if not rows:
        raise ConfigError("config defines no periods")
    if "theta" not in kv:
        raise ConfigError("config must set theta")
    prob = InventoryProblem(
        periods=tuple(rows),
        alpha=kv.get("alpha", 1.0),
        salvage=kv.get("salvage", 0.0),
    )
    return RunConfig(
        problem=prob,
        theta=kv["theta"],
        x0=kv.get("x0", 0.0),
        seed=kv.get("seed", 0),
        reps=kv.get("reps", 100_000),
        theta_ref=kv.get("theta_ref"),
    )


def dump_config(cfg):
    """Inverse of parse_config (up to comments and float formatting)."""
    out = [_HEADER]
    out.append(f"alpha = {cfg.problem.alpha!r}")
    out.append(f"salvage = {cfg.problem.salvage!r}")
    out.append(f"theta = {cfg.theta!r}")
    out.append(f"x0 = {cfg.x0!r}")
    out.append(f"seed = {cfg.seed}")
    out.append(f"reps = {cfg.reps}")
    if cfg.theta_ref is not None:
        out.append(f"theta_ref = {cfg.theta_ref!r}")
    out.append("periods:")
    for t, per in enumerate(cfg.problem.periods):
        out.append(
            f"{t} {per.c!r} {per.h!r} {per.p!r} {per.K!r} {per.demand.spec_string()}"
        )
    return "\n".join(out) + "\n"


def resolve_config(spec):
    """Read a config from a path, or fall back to a bundled one by name."""
    p = Path(spec)
    if p.exists():
        return p.read_text()
    name = spec if spec.endswith(".cfg") else spec + ".cfg"
    try:
        return resources.files("sspolicy.configs").joinpath(name).read_text()
    except (FileNotFoundError, ModuleNotFoundError, NotADirectoryError):
        raise ConfigError(f"no such config file or bundled config: {spec!r}") from None


def _set_threads():
    n = os.environ.get("SSPOLICY_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _load(config, theta, horizon, x0):
    try:
        cfg = parse_config(resolve_config(config))
    except ConfigError as e:
        raise click.UsageError(str(e)) from None
    if horizon is not None:
        if not 1 <= horizon <= cfg.problem.T:
            raise click.UsageError(
                f"--horizon must be in [1, {cfg.problem.T}] for this config"
            )
        cfg.problem = InventoryProblem(
            periods=cfg.problem.periods[:horizon],
            alpha=cfg.problem.alpha,
            salvage=cfg.problem.salvage,
        )
    if theta is not None:
        cfg.theta = theta
    if x0 is not None:
        cfg.x0 = x0
    issues = validate(cfg.problem)
    if issues:
        raise click.UsageError("invalid problem:\n  " + "\n  ".join(issues))
    return cfg


def _emit(records, payload, line):
    if records:
        click.echo(json.dumps(payload))
    else:
        click.echo(line)


def _header(records, cfg, config):
    payload = {
        "record": "header",
        "version": __version__,
        "config": config,
        "T": cfg.problem.T,
        "theta": cfg.theta,
        "x0": cfg.x0,
    }
    _emit(
        records,
        payload,
        f"# sspolicy {__version__}  config={config}  T={cfg.problem.T}"
        f"  theta={cfg.theta:g}  x0={cfg.x0:g}",
    )


def _solve(cfg):
    try:
        return solve_policy(cfg.problem, Grid(cfg.theta))
    except (SolverError, FloatingPointError) as e:
        raise NumericalFailure(str(e)) from None


def _certify(res, x0):
    try:
        return certify(res, x0)
    except (SolverError, OracleError, FloatingPointError) as e:
        raise NumericalFailure(str(e)) from None


def _common(fn):
    for opt in (
        click.option("--records", is_flag=True, help="emit JSON lines, one per record"),
        click.option("--x0", type=float, default=None, help="override starting stock"),
        click.option("--horizon", type=int, default=None, help="use only the first N periods"),
        click.option("--theta", type=float, default=None, help="override lattice spacing"),
        click.option("--config", "-c", required=True, help="config path or bundled name"),
    ):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="sspolicy")
def main():
    """Approximate threshold policies with certified error bounds."""
    _set_threads()


@main.command()
@_common
def solve(config, theta, horizon, x0, records):
    """Compute the lattice policy and print its thresholds."""
    cfg = _load(config, theta, horizon, x0)
    res = _solve(cfg)
    _header(records, cfg, config)
    _emit(records, {"record": "columns", "names": ["t", "s", "S"]}, f"{'t':>3} {'s':>14} {'S':>14}")
    for t in range(cfg.problem.T):
        _emit(
            records,
            {"record": "policy", "t": t, "s": float(res.s[t]), "S": float(res.S[t])},
            f"{t:>3} {res.s[t]:>14.6f} {res.S[t]:>14.6f}",
        )
    v0 = res.H_at_S[0] + cfg.problem.periods[0].K
    _emit(
        records,
        {"record": "start_value", "x0_below_s0": float(v0)},
        f"# start value below s_0: {v0:.6f}",
    )


@main.command("certify")
@_common
def certify_cmd(config, theta, horizon, x0, records):
    """Solve and bound the gap to the true optimum at the starting stock."""
    cfg = _load(config, theta, horizon, x0)
    res = _solve(cfg)
    cert = _certify(res, cfg.x0)
    _header(records, cfg, config)
    payload = {
        "record": "certificate",
        "x": cert.x,
        "theta": cert.theta,
        "approx_value": cert.approx_value,
        "slack_below": cert.slack_below,
        "slack_above": cert.slack_above,
        "gap_bound": cert.gap_bound,
        "value_low": cert.value_low,
        "value_high": cert.value_high,
        "rel_bound": cert.rel_bound,
        "rel_degenerate": cert.rel_degenerate,
        "cap_below": cert.cap_below,
        "cap_above": cert.cap_above,
        "cap_below_flat": cert.cap_below_flat,
        "cap_above_flat": cert.cap_above_flat,
    }
    lines = [
        f"approx value      {cert.approx_value:.6f}",
        f"slack below/above {cert.slack_below:.6f} / {cert.slack_above:.6f}",
        f"enclosure         [{cert.value_low:.6f}, {cert.value_high:.6f}]",
        f"policy gap bound  {cert.gap_bound:.6f}"
        + (
            f"  (relative {100 * cert.rel_bound:.4f}%)"
            if cert.rel_bound is not None
            else "  (relative bound degenerate: lower endpoint not positive)"
        ),
        f"closed-form caps  below {cert.cap_below:.6f} (flat {cert.cap_below_flat:.6f}),"
        f" above {cert.cap_above:.6f} (flat {cert.cap_above_flat:.6f})",
    ]
    _emit(records, payload, "\n".join(lines))


@main.command()
@_common
@click.option("--seed", type=int, default=None, help="override simulation seed")
@click.option("--reps", type=int, default=None, help="override replication count")
def simulate(config, theta, horizon, x0, records, seed, reps):
    """Solve, then estimate the policy's true cost by simulation."""
    cfg = _load(config, theta, horizon, x0)
    if seed is not None:
        cfg.seed = seed
    if reps is not None:
        cfg.reps = reps
    res = _solve(cfg)
    sim = simulate_policy(cfg.problem, res.policy, cfg.x0, cfg.reps, cfg.seed)
    _header(records, cfg, config)
    _emit(
        records,
        {
            "record": "simulation",
            "mean": sim.mean,
            "ci_half_width": sim.ci_half_width,
            "n_reps": sim.n_reps,
            "seed": sim.seed,
        },
        f"simulated cost    {sim.mean:.6f} +/- {sim.ci_half_width:.6f}"
        f"  ({sim.n_reps} reps, seed {sim.seed})",
    )


@main.command()
@_common
@click.option("--seed", type=int, default=None, help="override simulation seed")
@click.option("--reps", type=int, default=None, help="override replication count")
def check(config, theta, horizon, x0, records, seed, reps):
    """Internal consistency: bound chains and the simulation sandwich."""
    cfg = _load(config, theta, horizon, x0)
    if seed is not None:
        cfg.seed = seed
    if reps is not None:
        cfg.reps = reps
    res = _solve(cfg)
    cert = _certify(res, cfg.x0)
    sim = simulate_policy(cfg.problem, res.policy, cfg.x0, cfg.reps, cfg.seed)
    _header(records, cfg, config)
    tol = 1e-9
    slack3 = 3.0 * sim.ci_half_width
    checks = [
        (
            "chain-below",
            cert.slack_below <= cert.cap_below * (1 + tol) + tol
            and cert.cap_below <= cert.cap_below_flat * (1 + tol) + tol,
        ),
        (
            "chain-above",
            cert.slack_above <= cert.cap_above * (1 + tol) + tol
            and cert.cap_above <= cert.cap_above_flat * (1 + tol) + tol,
        ),
        (
            "sandwich",
            cert.value_low - slack3 <= sim.mean <= cert.value_high + slack3,
        ),
    ]
    bad = False
    for name, passed in checks:
        bad = bad or not passed
        _emit(
            records,
            {"record": "check", "name": name, "passed": bool(passed)},
            f"{name:<12} {'PASS' if passed else 'FAIL'}",
        )
    if bad:
        raise NumericalFailure("consistency check failed")


@main.command()
@_common
@click.option(
    "--thetas",
    default=None,
    help="comma-separated spacings (default: four halvings of the config theta)",
)
def converge(config, theta, horizon, x0, records, thetas):
    """Certify across a ladder of lattice spacings."""
    cfg = _load(config, theta, horizon, x0)
    if thetas:
        try:
            ladder = [float(v) for v in thetas.split(",")]
        except ValueError:
            raise click.UsageError(f"bad --thetas list: {thetas!r}") from None
        if not ladder or any(not v > 0 for v in ladder):
            raise click.UsageError("--thetas must be positive numbers")
    else:
        ladder = [cfg.theta / 2**i for i in range(4)]
    _header(records, cfg, config)
    _emit(
        records,
        {"record": "columns", "names": ["theta", "approx_value", "gap_bound", "rel_bound"]},
        f"{'theta':>10} {'approx':>14} {'gap_bound':>12} {'rel%':>8}",
    )
    for th in ladder:
        cfg.theta = th
        res = _solve(cfg)
        cert = _certify(res, cfg.x0)
        rel = 100 * cert.rel_bound if cert.rel_bound is not None else math.nan
        _emit(
            records,
            {
                "record": "convergence",
                "theta": th,
                "approx_value": cert.approx_value,
                "gap_bound": cert.gap_bound,
                "rel_bound": cert.rel_bound,
            },
            f"{th:>10.5f} {cert.approx_value:>14.6f} {cert.gap_bound:>12.6f} {rel:>8.4f}",
        )


@main.command("validate")
@click.option("--config", "-c", required=True, help="config path or bundled name")
def validate_cmd(config):
    """Parse a config and check the problem's validity conditions."""
    try:
        cfg = parse_config(resolve_config(config))
    except ConfigError as e:
        raise click.UsageError(str(e)) from None
    issues = validate(cfg.problem)
    if issues:
        for msg in issues:
            click.echo(f"invalid: {msg}")
        raise click.UsageError("problem fails validity conditions")
    click.echo(f"ok: {cfg.problem.T} periods, theta={cfg.theta:g}")


if __name__ == "__main__":
    main()
