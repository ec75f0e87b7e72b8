"""Run configuration: defaults reproduce the Darcy experiment, TOML overrides.

Example file::

    [model]
    m0 = 5
    n_levels = 3
    n_modes = 24

    [sampler]
    subchain_lengths = [5, 5]
    aem = true

    [run]
    n_chains = 4
    n_samples = 5000
    n_burnin = 2000
"""

import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError

# section each field lives in when read from / written to a file
_SECTIONS = {
    "model": ("m0", "n_levels", "n_modes", "sigma", "lam", "obs_per_side", "locations", "noise_std"),
    "sampler": ("subchain_lengths", "aem", "freeze_aem_after_burnin", "step_size", "tune_interval",
                "tune_factor", "coordinatewise"),
    "run": ("n_chains", "n_samples", "n_burnin", "base_seed", "output"),
}
# file spelling -> attribute
_ALIASES = {"lambda": "lam"}


@dataclass
class RunConfig:
    m0: int = 5
    n_levels: int = 3
    n_modes: int = 24
    sigma: float = 2.0
    lam: float = 0.3
    obs_per_side: int = 5
    locations: list = None
    noise_std: float = 0.01
    subchain_lengths: list = field(default_factory=lambda: [5, 5])
    aem: bool = True
    freeze_aem_after_burnin: bool = False
    step_size: float = 0.1
    tune_interval: int = 100
    tune_factor: float = 0.7
    coordinatewise: bool = False
    n_chains: int = 4
    n_samples: int = 5000
    n_burnin: int = 2000
    base_seed: int = 0
    output: str = "runs"

    def __post_init__(self):
        self.validate()

    @property
    def n_obs(self):
        return len(self.locations) if self.locations is not None else self.obs_per_side**2

    def validate(self):
        def positive_int(name, minimum=1):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
                raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value!r}")

        for name in ("n_levels", "n_modes", "obs_per_side", "tune_interval", "n_chains"):
            positive_int(name)
        positive_int("m0", 3)
        positive_int("n_samples", 0)
        positive_int("n_burnin", 0)
        positive_int("base_seed", 0)
        for name in ("sigma", "lam", "noise_std", "step_size"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                raise ConfigurationError(f"{name} must be a positive number, got {value!r}")
        if not 0 < self.tune_factor < 1:
            raise ConfigurationError(f"tune_factor must lie in (0, 1), got {self.tune_factor!r}")
        if self.n_levels < 2:
            raise ConfigurationError("n_levels must be at least 2 for a multilevel run")
        if len(self.subchain_lengths) != self.n_levels - 1:
            raise ConfigurationError(
                f"subchain_lengths needs {self.n_levels - 1} entries for {self.n_levels} levels, "
                f"got {self.subchain_lengths!r}"
            )
        if any(isinstance(j, bool) or not isinstance(j, int) or j < 1 for j in self.subchain_lengths):
            raise ConfigurationError(f"subchain lengths must be positive integers, got {self.subchain_lengths!r}")
        if self.locations is not None:
            try:
                ok = all(len(p) == 2 and 0 < p[0] < 1 and 0 < p[1] < 1 for p in self.locations)
            except TypeError:
                ok = False
            if not ok or not self.locations:
                raise ConfigurationError("locations must be a non-empty list of interior [x1, x2] pairs")
        for name in ("aem", "freeze_aem_after_burnin", "coordinatewise"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigurationError(f"{name} must be true or false")
        if not isinstance(self.output, str) or not self.output:
            raise ConfigurationError("output must be a non-empty path")

    # -- (de)serialisation --------------------------------------------------------

    @classmethod
    def from_dict(cls, data):
        """Build from a nested ``{section: {key: value}}`` mapping."""
        known = {f.name for f in fields(cls)}
        flat = {}
        for section, values in data.items():
            if section not in _SECTIONS or not isinstance(values, dict):
                raise ConfigurationError(f"unknown config section [{section}]")
            for key, value in values.items():
                name = _ALIASES.get(key, key)
                if name not in known or name not in _SECTIONS[section]:
                    raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
                flat[name] = value
        for name in ("sigma", "lam", "noise_std", "step_size", "tune_factor"):
            if isinstance(flat.get(name), int) and not isinstance(flat[name], bool):
                flat[name] = float(flat[name])
        return cls(**flat)

    def to_dict(self):
        flat = asdict(self)
        out = {}
        for section, names in _SECTIONS.items():
            out[section] = {}
            for name in names:
                if flat[name] is None:
                    continue
                key = next((k for k, v in _ALIASES.items() if v == name), name)
                out[section][key] = flat[name]
        return out

    def replace(self, **changes):
        data = asdict(self)
        data.update({k: v for k, v in changes.items() if v is not None})
        return RunConfig(**data)


def load_config(path=None):
    """Read a TOML config; ``None`` returns the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    return RunConfig.from_dict(data)
