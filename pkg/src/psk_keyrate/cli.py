from __future__ import annotations

from pathlib import Path
from typing import Any, NoReturn, Optional

import typer
from rich.console import Console
from rich.panel import Panel

from .config import CONDITIONING_MODES, ConfigError, Settings, SweepConfig, load_sweep_config
from .fock import FockError
from .logs import configure_logging
from .sweep import EXIT_USAGE, PRESETS, ResultTable, figure_preset, run_sweep

app = typer.Typer(help="Secret-key rates of phase-encoded coherent-state QKD over thermal-loss channels")
console = Console(stderr=True)

_PURE_LOSS_DEFAULT = {"dr", "rr", "gaussian"}


def _settings(ctx: typer.Context) -> Settings:
    if ctx.obj is None or "settings" not in ctx.obj:
        return Settings()
    return ctx.obj["settings"]


def _fail(exc: Exception) -> NoReturn:
    console.print(Panel(str(exc), title="psk-keyrate", style="red", expand=False))
    raise typer.Exit(EXIT_USAGE) from exc


def _emit(table: ResultTable, fmt: str, out: Optional[Path]) -> None:
    if out is not None:
        table.write(out, fmt)  # type: ignore[arg-type]
        console.print(Panel.fit(f"{len(table)} rows written to {out}", title="psk-keyrate"))
    else:
        typer.echo(table.render(fmt), nl=False)  # type: ignore[arg-type]
    if not table.all_converged:
        failed = sum(not row.point.converged for row in table.rows)
        console.print(
            Panel(
                f"{failed} of {len(table)} rows did not pass the convergence guard",
                title="psk-keyrate",
                style="yellow",
                expand=False,
            )
        )
        raise typer.Exit(table.exit_code)


def _drop_none(values: dict[str, Any]) -> dict[str, Any]:
    return {key: value for key, value in values.items() if value is not None}


@app.callback()
def _app_callback(
    ctx: typer.Context,
    workers: Optional[int] = typer.Option(None, "--workers", help="Worker processes for sweeps"),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING or ERROR"),
) -> None:
    try:
        settings = Settings()
    except ValueError as exc:
        _fail(ConfigError("environment", f"malformed PSK_KEYRATE_* value ({exc})"))
    if workers is not None:
        settings.workers = max(workers, 1)
    if log_level is not None:
        settings.log_level = log_level.upper()
    try:
        configure_logging(settings.log_level)
    except ValueError as exc:
        _fail(exc)
    ctx.obj = {"settings": settings}


@app.command()
def entropy(
    ctx: typer.Context,
    n: str = typer.Option("4", "--n", help="Alphabet size, or 'inf'"),
    z: list[float] = typer.Option(..., "--z", help="Radius; repeat for several"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the table here instead of stdout"),
    fmt: str = typer.Option("csv", "--format", help="csv or json"),
) -> None:
    """Von Neumann entropy of the average source state per radius."""

    try:
        cfg = SweepConfig.from_mapping({"n": n, "z": z, "direction": "entropy", "format": fmt})
        table = run_sweep(cfg, _settings(ctx))
    except (ConfigError, FockError) as exc:
        _fail(exc)
    _emit(table, cfg.format, out)


@app.command()
def rate(
    ctx: typer.Context,
    n: str = typer.Option("4", "--n", help="Alphabet size, or 'inf' for dr-upper"),
    z: float = typer.Option(..., "--z", help="Constellation radius"),
    db: Optional[float] = typer.Option(None, "--db", help="Channel attenuation in dB"),
    tau: Optional[float] = typer.Option(None, "--tau", help="Channel transmissivity"),
    nbar: Optional[float] = typer.Option(None, "--nbar", help="Thermal photons of the environment"),
    epsilon: Optional[float] = typer.Option(None, "--epsilon", help="Excess noise in shot-noise units"),
    epsilon_convention: str = typer.Option("input", "--epsilon-convention", help="input or output"),
    direction: str = typer.Option("rr", "--direction", help="dr, rr, dr-upper or gaussian"),
    vm: Optional[float] = typer.Option(None, "--vm", help="Gaussian modulation variance (default 2z²)"),
    beta: float = typer.Option(1.0, "--beta", help="Reconciliation efficiency"),
    cutoff: Optional[int] = typer.Option(None, "--cutoff", help="Fock dimension per mode"),
    grid_radial: Optional[int] = typer.Option(None, "--grid-radial"),
    grid_angular: Optional[int] = typer.Option(None, "--grid-angular"),
    mode: str = typer.Option("exact", "--mode", help="exact, unconditioned or strict-paper"),
    out: Optional[Path] = typer.Option(None, "--out"),
    fmt: str = typer.Option("csv", "--format", help="csv or json"),
) -> None:
    """Key rate at a single protocol point."""

    if nbar is None and epsilon is None and direction in _PURE_LOSS_DEFAULT:
        nbar = 0.0
    values = _drop_none(
        {
            "n": n,
            "z": [z],
            "db": None if db is None else [db],
            "tau": None if tau is None else [tau],
            "nbar": nbar,
            "epsilon": epsilon,
            "epsilon_convention": epsilon_convention,
            "direction": direction,
            "vm": vm,
            "beta": beta,
            "cutoff": cutoff,
            "grid_radial": grid_radial,
            "grid_angular": grid_angular,
            "mode": mode,
            "format": fmt,
        }
    )
    try:
        cfg = SweepConfig.from_mapping(values)
        table = run_sweep(cfg, _settings(ctx))
    except (ConfigError, FockError) as exc:
        _fail(exc)
    _emit(table, cfg.format, out)


@app.command()
def sweep(
    ctx: typer.Context,
    config: Path = typer.Argument(..., help="JSON sweep configuration"),
    n: Optional[str] = typer.Option(None, "--n"),
    z: Optional[list[float]] = typer.Option(None, "--z"),
    db: Optional[list[float]] = typer.Option(None, "--db"),
    tau: Optional[list[float]] = typer.Option(None, "--tau"),
    nbar: Optional[float] = typer.Option(None, "--nbar"),
    epsilon: Optional[float] = typer.Option(None, "--epsilon"),
    epsilon_convention: Optional[str] = typer.Option(None, "--epsilon-convention"),
    direction: Optional[str] = typer.Option(None, "--direction"),
    vm: Optional[float] = typer.Option(None, "--vm"),
    beta: Optional[float] = typer.Option(None, "--beta"),
    cutoff: Optional[int] = typer.Option(None, "--cutoff"),
    grid_radial: Optional[int] = typer.Option(None, "--grid-radial"),
    grid_angular: Optional[int] = typer.Option(None, "--grid-angular"),
    mode: Optional[str] = typer.Option(None, "--mode"),
    out: Optional[Path] = typer.Option(None, "--out"),
    fmt: Optional[str] = typer.Option(None, "--format"),
) -> None:
    """Run a configured sweep; flags override values from the file."""

    overrides = _drop_none(
        {
            "n": n,
            "z": z or None,
            "db": db or None,
            "tau": tau or None,
            "nbar": nbar,
            "epsilon": epsilon,
            "epsilon_convention": epsilon_convention,
            "direction": direction,
            "vm": vm,
            "beta": beta,
            "cutoff": cutoff,
            "grid_radial": grid_radial,
            "grid_angular": grid_angular,
            "mode": mode,
            "out": str(out) if out else None,
            "format": fmt,
        }
    )
    try:
        cfg = load_sweep_config(config, overrides)
        table = run_sweep(cfg, _settings(ctx))
    except (ConfigError, FockError) as exc:
        _fail(exc)
    _emit(table, cfg.format, cfg.out)


@app.command()
def figure(
    ctx: typer.Context,
    name: str = typer.Argument(..., help=f"Preset: {', '.join(PRESETS)}"),
    mode: Optional[str] = typer.Option(None, "--mode", help="exact, unconditioned or strict-paper"),
    out: Optional[Path] = typer.Option(None, "--out"),
    fmt: str = typer.Option("csv", "--format", help="csv or json"),
) -> None:
    """Reproduce the data behind a named figure preset."""

    if fmt not in ("csv", "json"):
        _fail(ConfigError("format", f"{fmt!r} is not one of csv, json"))
    if mode is not None and mode not in CONDITIONING_MODES:
        _fail(ConfigError("mode", f"{mode!r} is not one of {', '.join(sorted(CONDITIONING_MODES))}"))
    try:
        table = figure_preset(name, _settings(ctx), mode=mode)  # type: ignore[arg-type]
    except (ConfigError, FockError) as exc:
        _fail(exc)
    _emit(table, fmt, out)


if __name__ == "__main__":  # pragma: no cover
    app()
