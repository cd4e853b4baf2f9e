"""Run configuration: a flat key = value file plus command-line overrides"""
import datetime as dt
import json
import logging
import math
import tomllib
from pathlib import Path
from typing import Any, NamedTuple, Self, TypeAlias

from . import __version__, fowler

LOGGER = logging.getLogger(__name__)

EPSILON_UNITS = ("fraction", "absolute")

FIXTURES = ("bubble", "cylinder", "fowler", "symmetric")

INSTANCES = ("fowler", "bubble", "flat")

_ConfigDict: TypeAlias = dict[str, Any]


class ConfigError(ValueError):
    """A run configuration could not be parsed or failed validation"""


class RunConfig(NamedTuple):
    """Everything a command needs to reproduce a run

    Attributes
    ----------
    command : str
        The command the configuration was resolved for
    n : int
        The dimension
    epsilon : float
        The minimum of the Fowler solution, read according to `epsilon_unit`
    epsilon_unit : str
        "fraction" (of the equilibrium value v0) or "absolute"
    t0 : float or None
        The cylinder time that becomes the unit sphere. None picks the middle of
        the descending half-period.
    t_max : float
        The end of the integration window for trajectory exports
    step : float
        The integration step
    fractions : tuple of float
        The grid of epsilon / v0 for period tables
    seed : int
        The seed for every random sample
    num_balls : int
        The number of balls in a convexity scan
    boundary_samples : int
        The number of points sampled on each sphere
    exclusion_radius : float
        The radius excluded around each singular point
    grid_cells : int
        Grid cells per half-width for moving-plane fields
    tolerance : float or None
        The bisection tolerance on the critical height. None uses the
        fixture's default.
    instance : str
        The instance a convexity scan runs on: "fowler", "bubble" or "flat"
    fixture : str
        The named fixture for the Kelvin and moving-plane commands
    override : bool
        Run even when an instance fails the theorem's hypotheses
    threads : int or None
        Worker threads. None defers to the environment.
    output : Path or None
        Where the command writes its main output
    """

    command: str = "scan"
    n: int = 3
    epsilon: float = 0.5
    epsilon_unit: str = "fraction"
    t0: float | None = None
    t_max: float = 50.0
    step: float = fowler.DEFAULT_STEP
    fractions: tuple[float, ...] = (0.1, 0.25, 0.5, 0.75, 0.9, 0.99)
    seed: int = 0
    num_balls: int = 200
    boundary_samples: int = 100
    exclusion_radius: float = 1e-3
    grid_cells: int = 24
    tolerance: float | None = None
    instance: str = "fowler"
    fixture: str = "fowler"
    override: bool = False
    threads: int | None = None
    output: Path | None = None

    @classmethod
    def load(cls, path: Path | None = None, **overrides) -> Self:
        """Read a configuration file and apply overrides on top of it

        Parameters
        ----------
        path : Path, optional
            A flat key = value (TOML) file. If None is given, only the defaults
            and the overrides are used.
        **overrides
            Values that take priority over the file (typically command-line
            flags). Overrides that are None are ignored.

        Returns
        -------
        RunConfig
            The resolved, validated configuration

        Raises
        ------
        ConfigError
            If the file cannot be parsed, contains unknown keys, or any value
            fails validation
        OSError
            If the file does not exist or cannot otherwise be read
        """
        as_dict: _ConfigDict = {}
        if path is not None:
            LOGGER.debug("Loading run configuration from %s", path)
            try:
                contents: _ConfigDict = tomllib.loads(Path(path).read_text("utf-8"))
            except tomllib.TOMLDecodeError as parse_error:
                raise ConfigError(f"Could not parse {path}: {parse_error}") from parse_error
            for key, value in contents.items():
                if key in ("generated_by_cclab", "last_modified"):
                    continue
                if key not in cls._fields:
                    raise ConfigError(f"Unknown configuration key {key!r} in {path}")
                as_dict[key] = value
        for key, value in overrides.items():
            if key not in cls._fields:
                raise ConfigError(f"Unknown configuration key {key!r}")
            if value is not None:
                as_dict[key] = value
        if "fractions" in as_dict:
            as_dict["fractions"] = tuple(float(value) for value in as_dict["fractions"])
        if as_dict.get("output") is not None:
            as_dict["output"] = Path(as_dict["output"])
        config = cls(**as_dict)
        try:
            config.validate()
        except TypeError as wrong_type:
            raise ConfigError(f"Invalid configuration value: {wrong_type}") from wrong_type
        return config

    def validate(self) -> None:
        """Check every field against the preconditions of the commands

        Raises
        ------
        ConfigError
            Naming the first offending field
        InvalidDimensionError
            If n < 3
        """
        fowler.validate_dimension(self.n)
        if self.epsilon_unit not in EPSILON_UNITS:
            raise ConfigError(
                f"epsilon_unit must be one of {', '.join(EPSILON_UNITS)}"
                f" (got {self.epsilon_unit!r})"
            )
        if self.epsilon_unit == "fraction":
            if not 0 < self.epsilon <= 1:
                raise ConfigError(
                    f"epsilon as a fraction of v0 must be in (0, 1] (got {self.epsilon})"
                )
        else:
            fowler.FowlerParams(self.n, self.epsilon)
        for name in ("t_max", "step", "exclusion_radius", "tolerance"):
            value = getattr(self, name)
            if value is None:
                continue
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive number (got {value})")
        if self.t0 is not None and not math.isfinite(self.t0):
            raise ConfigError(f"t0 must be finite (got {self.t0})")
        if not self.exclusion_radius < 1:
            raise ConfigError("exclusion_radius must be smaller than the unit ball")
        if not all(0 < fraction <= 1 for fraction in self.fractions):
            raise ConfigError("Every entry of fractions must be in (0, 1]")
        for name, minimum in (("num_balls", 1), ("boundary_samples", 1), ("grid_cells", 2)):
            value = getattr(self, name)
            if int(value) != value or value < minimum:
                raise ConfigError(f"{name} must be an integer of at least {minimum}")
        if self.threads is not None and (int(self.threads) != self.threads or self.threads < 1):
            raise ConfigError(f"threads must be a positive integer (got {self.threads})")
        if self.fixture not in FIXTURES:
            raise ConfigError(
                f"fixture must be one of {', '.join(FIXTURES)} (got {self.fixture!r})"
            )
        if self.instance not in INSTANCES:
            raise ConfigError(
                f"instance must be one of {', '.join(INSTANCES)} (got {self.instance!r})"
            )

    @property
    def epsilon_absolute(self) -> float:
        """epsilon, converted to an absolute value"""
        if self.epsilon_unit == "fraction":
            return self.epsilon * fowler.equilibrium_v0(self.n)
        return self.epsilon

    def write(self, path: Path) -> None:
        """Write the resolved configuration, so the run can be reproduced

        Parameters
        ----------
        path : Path
            The destination file, which is overwritten

        Raises
        ------
        OSError
            If the destination folder does not exist or cannot be written to
        """
        as_dict: _ConfigDict = {
            "generated_by_cclab": __version__,
            "last_modified": dt.datetime.now().isoformat(sep=" "),
        }
        for attribute, value in self._asdict().items():  # pylint: disable=no-member
            if value is None:
                continue
            as_dict[attribute] = str(value) if isinstance(value, Path) else value

        LOGGER.debug("Writing run configuration to %s", path)
        Path(path).write_text(_to_toml(as_dict), encoding="utf-8")


def _to_toml(config: _ConfigDict) -> str:
    """Serialize a flat dict of scalars and lists of scalars as TOML

    Parameters
    ----------
    config : dict
        The entries to write. Values must be str, bool, int, float or a
        tuple / list of those.

    Returns
    -------
    str
        The configuration serialized as a TOML-compatible str

    Notes
    -----
    Floats are written with 17 significant digits, so a written configuration
    reads back to the same values.
    """

    def scalar(value) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            written = f"{value:.17g}"
            # TOML reads "50" as an integer
            return written if any(char in written for char in ".en") else written + ".0"
        if isinstance(value, int):
            return str(value)
        return json.dumps(value)

    dumped = ""
    for key, value in config.items():
        dumped += f"{key} = "
        if isinstance(value, (list, tuple)):
            dumped += "[" + ", ".join(scalar(entry) for entry in value) + "]\n"
        else:
            dumped += f"{scalar(value)}\n"
    return dumped
