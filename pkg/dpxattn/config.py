# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Configuration helpers"""

from argparse import Namespace
from dataclasses import (
    asdict,
    dataclass,
    field,
    fields,
    _MISSING_TYPE,
)
from hashlib import md5
import math
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib as toml
except ImportError:
    import tomlkit as toml

from .errors import InvalidParameter

COMMANDS = ("gen", "eval", "attack", "attn")
MODES = ("l1", "l2sq", "softmax", "adaptive", "attention")
KERNEL_MODES = ("softmax", "adaptive", "attention")
NORMALIZERS = ("exact", "private")


@dataclass
class RunConfig:
    """Runtime config"""
    command: str = "eval"
    configfile: Optional[Path] = None
    data_dir: Path = Path("data")
    output: Path = Path("report.json")
    debug: bool = False

    # problem size
    n: int = 128
    m: int = 8
    d: int = 2
    radius: float = 1.0
    weight_bound: float = 1.0
    grid_size: Optional[int] = None

    # privacy and accuracy parameters
    epsilon: float = 2.0
    delta: float = 0.01
    delta_prime: float = 0.01
    c_split: float = 0.05
    epsilon_s: float = 0.05
    alpha: float = 0.3
    p_f: float = 0.01
    l_override: Optional[int] = None
    epsilon_floor: float = 1e-6
    kernel_cap: int = 10 ** 6

    # structure choices
    mode: str = "softmax"
    normalizer: str = "exact"
    compose_columns: bool = False
    noisy_scalars: bool = False
    noise: str = "on"
    unsafe_test: bool = False

    # run control
    seed: int = 0
    trials: int = 20
    record_timings: bool = False
    attack_grid: int = 20
    attack_rounds: int = 100

    _config_file_hash: str = field(init=False, default="")

    def read_config(self, force: bool = False) -> None:
        """Read the config file, if one is set"""
        if self.configfile is None:
            return
        with Path(self.configfile).open("r", encoding="utf-8") as handle:
            data = handle.read()
            digest = md5(data.encode("utf-8")).hexdigest()
            if digest == self._config_file_hash and not force:
                # Config file didn't change, just return
                return
            self._config_file_hash = digest
            loaded = toml.loads(data)
        self.update_from_dict(loaded)

    def update_from_dict(self, config: dict[str, Any]) -> None:
        """Update the running config from a dict, like loaded from a config file"""
        for arg in fields(RunConfig):
            if not arg.init:
                continue
            if arg.name in config:
                setattr(self, arg.name, config[arg.name])

    @property
    def noise_enabled(self) -> bool:
        """Whether structures add privacy noise"""
        return self.noise != "off"

    def validate(self) -> None:
        """Check every parameter domain, raising InvalidParameter on the first violation"""
        if self.command not in COMMANDS:
            raise InvalidParameter(f"unknown command {self.command!r}")
        if self.mode not in MODES:
            raise InvalidParameter(f"mode must be one of {', '.join(MODES)}, not {self.mode!r}")
        if self.normalizer not in NORMALIZERS:
            raise InvalidParameter(f"normalizer must be exact or private, not {self.normalizer!r}")
        if self.noise not in ("on", "off"):
            raise InvalidParameter(f"noise must be on or off, not {self.noise!r}")
        if not self.noise_enabled and not self.unsafe_test:
            raise InvalidParameter("--noise off is only allowed together with --unsafe-test")

        for name in ("n", "d"):
            if getattr(self, name) < 1:
                raise InvalidParameter(f"{name} must be at least 1, not {getattr(self, name)}")
        for name in ("m", "trials", "attack_rounds"):
            if getattr(self, name) < 0:
                raise InvalidParameter(f"{name} must not be negative, not {getattr(self, name)}")
        if self.attack_grid < 1:
            raise InvalidParameter(f"attack grid must be at least 1, not {self.attack_grid}")
        if self.grid_size is not None and self.grid_size < 1:
            raise InvalidParameter(f"grid size must be at least 1, not {self.grid_size}")
        if self.l_override is not None and self.l_override < 1:
            raise InvalidParameter(f"copy count override must be at least 1, not {self.l_override}")
        if self.seed < 0:
            raise InvalidParameter(f"seed must not be negative, not {self.seed}")

        for name in ("radius", "weight_bound", "epsilon", "epsilon_floor"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise InvalidParameter(f"{name} must be finite and positive, not {value}")
        if not 0 < self.delta < 1:
            raise InvalidParameter(f"delta must be in (0, 1), not {self.delta}")
        if not 0 < self.delta_prime < 1:
            raise InvalidParameter(f"delta' must be in (0, 1), not {self.delta_prime}")
        if not 0 < self.c_split < 0.1:
            raise InvalidParameter(f"c must be in (0, 0.1), not {self.c_split}")
        if not 0 < self.alpha < 1:
            raise InvalidParameter(f"alpha must be in (0, 1), not {self.alpha}")
        if not 0 < self.epsilon_s <= 0.1:
            raise InvalidParameter(f"epsilon_s must be in (0, 0.1], not {self.epsilon_s}")
        if not 0 < self.p_f <= 0.01:
            raise InvalidParameter(f"p_f must be in (0, 0.01], not {self.p_f}")
        if self.uses_kernel and self.radius < 1:
            raise InvalidParameter(f"{self.command} with a softmax kernel needs R >= 1, not {self.radius}")

    @property
    def uses_kernel(self) -> bool:
        """Whether the command builds softmax structures; attack and attn always do, gen never"""
        if self.command == "eval":
            return self.mode in KERNEL_MODES
        return self.command in ("attack", "attn")

    def to_json(self) -> dict[str, Any]:
        """Convert to a JSON-able datastructure, leaving out per-run paths"""
        data = asdict(self)
        for name in ("_config_file_hash", "configfile", "data_dir", "output", "debug"):
            data.pop(name, None)
        return data

    @classmethod
    def from_argparse(cls, args: Namespace) -> "RunConfig":
        """Instantiate from an argparse.Namespace"""
        kwargs: dict[str, Any] = {}
        for arg in fields(RunConfig):
            if not arg.init:
                continue
            if arg.name in args:
                kwargs[arg.name] = getattr(args, arg.name)
            else:
                if not isinstance(arg.default, _MISSING_TYPE):
                    kwargs[arg.name] = arg.default
                elif not isinstance(arg.default_factory, _MISSING_TYPE):
                    kwargs[arg.name] = arg.default_factory()
                else:
                    raise ValueError(f"Missing value for {arg.name}")

        return cls(**kwargs)
