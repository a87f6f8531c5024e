"""Parameter sweeps, figure presets and the CSV/JSON result tables."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Final

import numpy as np

from .channel import ChannelParams, db_to_tau, nbar_from_excess_noise, tau_to_db
from .config import SIGNIFICANT_DIGITS, Conditioning, Direction, OutputFormat, Settings, SweepConfig
from .constellation import INFINITE, AlphabetSize
from .fock import UsageError
from .rates import RatePoint, rate_point

logger = logging.getLogger(__name__)

CSV_COLUMNS: Final[tuple[str, ...]] = (
    "attenuation_db",
    "tau",
    "nbar",
    "epsilon",
    "N",
    "z",
    "direction",
    "i_ab_bits",
    "holevo_bits",
    "rate_bits",
    "cutoff_dim",
    "converged",
)

EXIT_OK: Final[int] = 0
EXIT_USAGE: Final[int] = 2
EXIT_NOT_CONVERGED: Final[int] = 3


@dataclass(frozen=True, slots=True)
class SweepRow:
    point: RatePoint
    attenuation_db: float | None = None
    epsilon: float | None = None
    curve: str = ""

    def record(self) -> dict[str, Any]:
        p = self.point
        return {
            "attenuation_db": self.attenuation_db,
            "tau": p.tau,
            "nbar": p.nbar,
            "epsilon": self.epsilon,
            "N": p.n_label,
            "z": p.z,
            "direction": p.direction,
            "i_ab_bits": p.i_ab,
            "holevo_bits": p.holevo,
            "rate_bits": p.rate,
            "cutoff_dim": p.cutoff_dim,
            "converged": p.converged,
        }


@dataclass(slots=True)
class ResultTable:
    rows: list[SweepRow] = field(default_factory=list)
    label: str = ""

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def all_converged(self) -> bool:
        return all(row.point.converged for row in self.rows)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.all_converged else EXIT_NOT_CONVERGED

    def extend(self, other: ResultTable) -> None:
        self.rows.extend(other.rows)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            record = row.record()
            writer.writerow([_format_cell(record[name]) for name in CSV_COLUMNS])
        return buffer.getvalue()

    def to_json(self) -> str:
        rows = []
        for row in self.rows:
            record = {name: _json_value(value) for name, value in row.record().items()}
            if row.curve:
                record["curve"] = row.curve
            rows.append(record)
        return json.dumps({"label": self.label, "rows": rows}, indent=2, ensure_ascii=False) + "\n"

    def render(self, fmt: OutputFormat = "csv") -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise UsageError(f"unknown output format {fmt!r}")

    def write(self, path: Path, fmt: OutputFormat = "csv") -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(fmt), encoding="utf-8")
        logger.info("wrote %d rows to %s", len(self.rows), path)


def _format_number(value: float) -> str:
    return format(value, f".{SIGNIFICANT_DIGITS}g")


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _format_number(value)
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, float):
        return float(_format_number(value))
    return value


# --------------------------------------------------------------------------- sweep execution


@dataclass(frozen=True, slots=True)
class SweepTask:
    """One protocol point; module-level so worker processes can unpickle it."""

    direction: Direction
    z: float
    n: AlphabetSize
    tau: float | None
    nbar: float
    attenuation_db: float | None
    epsilon: float | None
    mode: Conditioning
    beta: float
    vm: float | None
    cutoff: int | None
    grid_radial: int | None
    grid_angular: int | None
    curve: str
    settings: Settings


def _evaluate(task: SweepTask) -> SweepRow:
    ch = ChannelParams(task.tau, task.nbar) if task.tau is not None else None
    point = rate_point(
        task.direction,
        task.z,
        task.n,
        ch,
        mode=task.mode,
        beta=task.beta,
        vm=task.vm,
        cutoff_dim=task.cutoff,
        grid_radial=task.grid_radial,
        grid_angular=task.grid_angular,
        settings=task.settings,
    )
    return SweepRow(point, task.attenuation_db, task.epsilon, task.curve)


def _channel_axis(cfg: SweepConfig) -> list[tuple[float, float]]:
    """(τ, dB) pairs in configured order."""

    if cfg.db is not None:
        return [(db_to_tau(db), db) for db in cfg.db]
    assert cfg.tau is not None
    return [(tau, tau_to_db(tau)) for tau in cfg.tau]


def expand_tasks(cfg: SweepConfig, settings: Settings) -> list[SweepTask]:
    """Cartesian sweep order: radius outer, channel inner."""

    n: AlphabetSize = INFINITE if cfg.n is None else cfg.n
    common = dict(
        direction=cfg.direction,
        n=n,
        mode=cfg.mode,
        beta=cfg.beta,
        vm=cfg.vm,
        cutoff=cfg.cutoff,
        grid_radial=cfg.grid_radial,
        grid_angular=cfg.grid_angular,
        curve=cfg.label,
        settings=settings,
    )
    if cfg.direction == "entropy":
        return [
            SweepTask(z=z, tau=None, nbar=0.0, attenuation_db=None, epsilon=None, **common)
            for z in cfg.z
        ]

    channel = []
    for tau, db in _channel_axis(cfg):
        if cfg.epsilon is not None:
            nbar = nbar_from_excess_noise(tau, cfg.epsilon, cfg.epsilon_convention)
        else:
            nbar = cfg.nbar or 0.0
        channel.append((tau, db, nbar))
    return [
        SweepTask(z=z, tau=tau, nbar=nbar, attenuation_db=db, epsilon=cfg.epsilon, **common)
        for z in cfg.z
        for tau, db, nbar in channel
    ]


def run_sweep(cfg: SweepConfig, settings: Settings | None = None) -> ResultTable:
    settings = settings if settings is not None else Settings()
    tasks = expand_tasks(cfg, settings)
    logger.info("sweep %r: %d points, %d worker(s)", cfg.label or cfg.direction, len(tasks), settings.workers)
    if settings.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as executor:
            futures = [executor.submit(_evaluate, task) for task in tasks]
            rows = [future.result() for future in futures]
    else:
        rows = [_evaluate(task) for task in tasks]
    table = ResultTable(rows, cfg.label)
    if not table.all_converged:
        failed = sum(not row.point.converged for row in rows)
        logger.warning("%d of %d points did not converge", failed, len(rows))
    return table


# --------------------------------------------------------------------------- figure presets


def _grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    count = int(round((stop - start) / step)) + 1
    return tuple(float(v) for v in np.round(start + step * np.arange(count), 10))


_TAU_GRID = _grid(0.05, 1.0, 0.05)
_DR_RADII: Final[tuple[float, ...]] = (0.1, 0.3, 0.6, 1.0, 2.0, 1e6)


def _fig2() -> list[SweepConfig]:
    radii = _grid(0.0, 5.0, 0.05)
    sizes: list[int | None] = [1, 2, 3, 4, 5, 6, 8, None]
    return [
        SweepConfig(n=n, z=radii, direction="entropy", label=f"N={'inf' if n is None else n}")
        for n in sizes
    ]


def _fig3() -> list[SweepConfig]:
    return [
        SweepConfig(n=4, z=(z,), tau=_TAU_GRID, nbar=0.0, direction="dr-upper", label=f"N=4 z={z:g}")
        for z in _DR_RADII
    ]


def _fig4() -> list[SweepConfig]:
    return [
        SweepConfig(n=n, z=(z,), tau=_TAU_GRID, nbar=0.0, direction="dr-upper", label=f"N={'inf' if n is None else n} z={z:g}")
        for z in _DR_RADII[:-1]
        for n in (4, None)
    ]


def _fig5() -> list[SweepConfig]:
    db = _grid(0.0, 4.0, 0.25)
    return [
        SweepConfig(n=4, z=(0.1,), db=db, nbar=nbar, direction="dr", label=f"DR nbar={nbar:g}")
        for nbar in (0.0, 0.01, 0.1)
    ]


def _fig6() -> list[SweepConfig]:
    # Excess noise needs loss, so the noisy curves start at 1 dB.
    pure_db = _grid(0.0, 20.0, 1.0)
    noisy_db = pure_db[1:]
    return [
        SweepConfig(n=4, z=(0.1,), db=pure_db, nbar=0.0, direction="rr", label="RR pure loss"),
        SweepConfig(n=4, z=(0.1,), db=noisy_db, epsilon=0.001, direction="rr", label="RR eps=0.001"),
        SweepConfig(n=4, z=(0.1,), db=pure_db, nbar=0.0, direction="gaussian", vm=0.02, label="Gaussian pure loss"),
        SweepConfig(n=4, z=(0.1,), db=noisy_db, epsilon=0.001, direction="gaussian", vm=0.02, label="Gaussian eps=0.001"),
    ]


def _fig7() -> list[SweepConfig]:
    db = _grid(1.0, 20.0, 1.0)
    return [
        SweepConfig(n=4, z=(1.0,), db=db, epsilon=0.01, direction="rr", label="RR N=4 z=1"),
        SweepConfig(n=4, z=(1.0,), db=db, epsilon=0.01, direction="gaussian", vm=2.0, label="Gaussian VM=2"),
    ]


PRESETS: Final = {
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
}


def preset_configs(name: str) -> list[SweepConfig]:
    try:
        build = PRESETS[name]
    except KeyError:
        raise UsageError(f"unknown preset {name!r}; choose one of {', '.join(PRESETS)}") from None
    return build()


def figure_preset(
    name: str,
    settings: Settings | None = None,
    *,
    mode: Conditioning | None = None,
) -> ResultTable:
    """Evaluate every curve of a named figure preset, curves in declaration order."""

    table = ResultTable(label=name)
    for cfg in preset_configs(name):
        if mode is not None and cfg.direction == "rr":
            cfg = replace(cfg, mode=mode)
        table.extend(run_sweep(cfg, settings))
    return table
