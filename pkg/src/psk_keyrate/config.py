from __future__ import annotations

import json
import os
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Final, Literal

from dotenv import find_dotenv, load_dotenv

# Load .env from current working directory or parent directories
load_dotenv(find_dotenv(usecwd=True))

# Numerical tolerances shared by every module (kept here to avoid circular imports)
DEFAULT_TAIL_TOLERANCE: Final[float] = 1e-9
HERMITIAN_TOLERANCE: Final[float] = 1e-12
UNITARITY_TOLERANCE: Final[float] = 1e-10
NEGATIVE_EIGENVALUE_FLOOR: Final[float] = -1e-10
EIGENVALUE_CLAMP: Final[float] = 1e-12
GRAM_SCHMIDT_FLOOR: Final[float] = 1e-14
CONVERGENCE_TOLERANCE: Final[float] = 1e-5
NORMALIZATION_TOLERANCE: Final[float] = 1e-6
CUTOFF_GUARD_STEP: Final[int] = 4
MIN_CUTOFF_DIM: Final[int] = 10
WEDGE_RADIUS_SIGMAS: Final[float] = 6.0

DEFAULT_GRID_RADIAL: Final[int] = 80
DEFAULT_GRID_ANGULAR: Final[int] = 32
DEFAULT_NODE_CHUNK: Final[int] = 2048

SIGNIFICANT_DIGITS: Final[int] = 9

Direction = Literal["dr", "rr", "dr-upper", "gaussian", "entropy"]
Conditioning = Literal["exact", "unconditioned", "strict-paper"]
EpsilonConvention = Literal["input", "output"]
OutputFormat = Literal["csv", "json"]

DIRECTIONS: Final[frozenset[str]] = frozenset({"dr", "rr", "dr-upper", "gaussian", "entropy"})
# "strict-paper" is accepted as a synonym of "unconditioned".
UNCONDITIONED_MODES: Final[frozenset[str]] = frozenset({"unconditioned", "strict-paper"})
CONDITIONING_MODES: Final[frozenset[str]] = frozenset({"exact"}) | UNCONDITIONED_MODES
EPSILON_CONVENTIONS: Final[frozenset[str]] = frozenset({"input", "output"})
OUTPUT_FORMATS: Final[frozenset[str]] = frozenset({"csv", "json"})
INFINITE_TOKENS: Final[frozenset[str]] = frozenset({"inf", "infinite", "∞"})


class ConfigError(ValueError):
    """Invalid sweep configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message

    def __reduce__(self) -> tuple[type, tuple[str, str]]:
        return type(self), (self.field, self.message)


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in {"1", "true", "yes", "on"}


@dataclass(slots=True)
class Settings:
    tail_tolerance: float = field(
        default_factory=lambda: float(
            os.getenv("PSK_KEYRATE_TAIL_TOLERANCE", str(DEFAULT_TAIL_TOLERANCE))
        )
    )
    grid_radial: int = field(
        default_factory=lambda: int(os.getenv("PSK_KEYRATE_GRID_RADIAL", str(DEFAULT_GRID_RADIAL)))
    )
    grid_angular: int = field(
        default_factory=lambda: int(
            os.getenv("PSK_KEYRATE_GRID_ANGULAR", str(DEFAULT_GRID_ANGULAR))
        )
    )
    workers: int = field(default_factory=lambda: int(os.getenv("PSK_KEYRATE_WORKERS", "1")))
    node_chunk: int = field(
        default_factory=lambda: int(os.getenv("PSK_KEYRATE_NODE_CHUNK", str(DEFAULT_NODE_CHUNK)))
    )
    node_threads: int = field(
        default_factory=lambda: int(os.getenv("PSK_KEYRATE_NODE_THREADS", "1"))
    )
    check_convergence: bool = field(
        default_factory=lambda: _env_bool("PSK_KEYRATE_CHECK_CONVERGENCE", "1")
    )
    log_level: str = field(
        default_factory=lambda: os.getenv("PSK_KEYRATE_LOG_LEVEL", "WARNING").upper()
    )


def parse_alphabet_size(value: Any, field_name: str = "n") -> int | None:
    """Return the alphabet size, ``None`` meaning the infinite (continuous) alphabet."""

    if value is None:
        raise ConfigError(field_name, "alphabet size is required")
    if isinstance(value, str):
        token = value.strip().lower()
        if token in INFINITE_TOKENS:
            return None
        try:
            value = int(token)
        except ValueError as exc:
            raise ConfigError(field_name, f"not an integer or 'inf': {value!r}") from exc
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field_name, f"not an integer or 'inf': {value!r}")
    if value < 1:
        raise ConfigError(field_name, "alphabet size must be >= 1")
    return value


def _float_list(raw: Any, field_name: str, *, minimum: float | None = None) -> tuple[float, ...]:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raw = [raw]
    if not isinstance(raw, Sequence) or isinstance(raw, str) or not raw:
        raise ConfigError(field_name, "expected a nonempty list of numbers")
    values: list[float] = []
    for item in raw:
        try:
            number = float(item)
        except (TypeError, ValueError) as exc:
            raise ConfigError(field_name, f"not a number: {item!r}") from exc
        if minimum is not None and number < minimum:
            raise ConfigError(field_name, f"value {number} is below {minimum}")
        values.append(number)
    return tuple(values)


def _choice(raw: Any, field_name: str, allowed: frozenset[str]) -> str:
    value = str(raw)
    if value not in allowed:
        raise ConfigError(field_name, f"{value!r} is not one of {', '.join(sorted(allowed))}")
    return value


@dataclass(frozen=True, slots=True)
class SweepConfig:
    n: int | None
    z: tuple[float, ...]
    tau: tuple[float, ...] | None = None
    db: tuple[float, ...] | None = None
    nbar: float | None = None
    epsilon: float | None = None
    epsilon_convention: EpsilonConvention = "input"
    direction: Direction = "rr"
    vm: float | None = None
    beta: float = 1.0
    cutoff: int | None = None
    grid_radial: int | None = None
    grid_angular: int | None = None
    mode: Conditioning = "exact"
    out: Path | None = None
    format: OutputFormat = "csv"
    label: str = ""

    def __post_init__(self) -> None:
        if self.direction == "entropy":
            if self.tau is not None or self.db is not None:
                raise ConfigError("tau/db", "entropy sweeps take no channel")
        elif (self.tau is None) == (self.db is None):
            raise ConfigError("tau/db", "provide exactly one of a tau list or a dB list")
        if self.direction in {"dr", "rr", "gaussian"} and (self.nbar is None) == (
            self.epsilon is None
        ):
            raise ConfigError("nbar/epsilon", "provide exactly one of nbar and epsilon")
        if self.direction in {"dr-upper", "entropy"} and (self.nbar or self.epsilon):
            raise ConfigError("nbar/epsilon", f"{self.direction!r} is defined for pure loss only")
        if self.tau is not None and any(not 0.0 < t <= 1.0 for t in self.tau):
            raise ConfigError("tau", "transmissivities must lie in (0, 1]")
        if self.db is not None and any(d < 0.0 for d in self.db):
            raise ConfigError("db", "attenuations must be >= 0 dB")
        if any(z < 0.0 for z in self.z):
            raise ConfigError("z", "radii must be >= 0")
        if self.nbar is not None and self.nbar < 0.0:
            raise ConfigError("nbar", "thermal photon number must be >= 0")
        if self.epsilon is not None and self.epsilon < 0.0:
            raise ConfigError("epsilon", "excess noise must be >= 0")
        if self.vm is not None and self.vm < 0.0:
            raise ConfigError("vm", "modulation variance must be >= 0")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError("beta", "reconciliation efficiency must lie in (0, 1]")
        if self.cutoff is not None and self.cutoff < 2:
            raise ConfigError("cutoff", "Fock cutoff must be >= 2")
        for name in ("grid_radial", "grid_angular"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(name, "node counts must be >= 1")
        if self.n is None and self.direction not in {"dr-upper", "entropy"}:
            raise ConfigError("n", f"the infinite alphabet is not supported for {self.direction!r}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> SweepConfig:
        """Build a config from a JSON-like mapping, nested sections or flat keys."""

        flat: dict[str, Any] = {}
        for key, value in data.items():
            if isinstance(value, Mapping):
                flat.update(value)
            else:
                flat[key] = value
        known = set(cls.__slots__)  # type: ignore[attr-defined]
        unknown = sorted(set(flat) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration field")

        tau = flat.get("tau")
        db = flat.get("db")
        out = flat.get("out")
        return cls(
            n=parse_alphabet_size(flat.get("n")),
            z=_float_list(flat.get("z"), "z", minimum=0.0),
            tau=_float_list(tau, "tau") if tau is not None else None,
            db=_float_list(db, "db", minimum=0.0) if db is not None else None,
            nbar=_optional_float(flat.get("nbar"), "nbar"),
            epsilon=_optional_float(flat.get("epsilon"), "epsilon"),
            epsilon_convention=_choice(  # type: ignore[arg-type]
                flat.get("epsilon_convention", "input"), "epsilon_convention", EPSILON_CONVENTIONS
            ),
            direction=_choice(flat.get("direction", "rr"), "direction", DIRECTIONS),  # type: ignore[arg-type]
            vm=_optional_float(flat.get("vm"), "vm"),
            beta=float(flat.get("beta", 1.0)),
            cutoff=_optional_int(flat.get("cutoff"), "cutoff"),
            grid_radial=_optional_int(flat.get("grid_radial"), "grid_radial"),
            grid_angular=_optional_int(flat.get("grid_angular"), "grid_angular"),
            mode=_choice(flat.get("mode", "exact"), "mode", CONDITIONING_MODES),  # type: ignore[arg-type]
            out=Path(out) if out else None,
            format=_choice(flat.get("format", "csv"), "format", OUTPUT_FORMATS),  # type: ignore[arg-type]
            label=str(flat.get("label", "")),
        )

    def to_mapping(self) -> dict[str, Any]:
        data: dict[str, Any] = {}
        for name in self.__slots__:  # type: ignore[attr-defined]
            value = getattr(self, name)
            if isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, Path):
                value = str(value)
            data[name] = value
        data["n"] = "inf" if self.n is None else self.n
        return data


def _optional_float(raw: Any, field_name: str) -> float | None:
    if raw is None:
        return None
    try:
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(field_name, f"not a number: {raw!r}") from exc


def _optional_int(raw: Any, field_name: str) -> int | None:
    if raw is None:
        return None
    if isinstance(raw, bool):
        raise ConfigError(field_name, f"not an integer: {raw!r}")
    try:
        return int(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(field_name, f"not an integer: {raw!r}") from exc


def load_sweep_config(path: Path, overrides: Mapping[str, Any] | None = None) -> SweepConfig:
    """Read a JSON sweep document; ``overrides`` (CLI flags) win over file values."""

    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError("config", f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise ConfigError("config", "top-level document must be an object")

    flat: dict[str, Any] = {}
    for key, value in document.items():
        if isinstance(value, Mapping):
            flat.update(value)
        else:
            flat[key] = value
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        flat[key] = value
    # A flag picking one side of a mutually exclusive pair clears the file's other side.
    for chosen, other in (("tau", "db"), ("db", "tau"), ("nbar", "epsilon"), ("epsilon", "nbar")):
        if overrides and overrides.get(chosen) is not None:
            flat.pop(other, None)
    return SweepConfig.from_mapping(flat)
