"""Run configuration: INI sections validated by pydantic, defaults from the environment."""

from __future__ import annotations

import configparser
import os
from typing import Literal, Optional

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from qc_semilinear.beltrami import BeltramiOptions, MatrixField
from qc_semilinear.errors import ConfigError
from qc_semilinear.fileio import read_boundary_data, read_jordan_domain
from qc_semilinear.geometry import DiskGrid, disk, slit_disk, square
from qc_semilinear.oracles import radial_stretch_reference
from qc_semilinear.potential import BoundaryData, ScalarField
from qc_semilinear.semilinear import (
    ContinuationOptions,
    make_constant,
    make_exponential,
    make_linear,
    make_power,
    make_signed_power,
)

# Load environment variables from .env file
load_dotenv()

MODES = ("solve-disk", "solve-domain", "beltrami-map", "qhyp", "verify")


def env_seed():
    value = os.getenv("QC_SEMILINEAR_SEED")
    return None if value in (None, "") else int(value)


def output_root():
    return os.getenv("QC_SEMILINEAR_OUTPUT") or "./output"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridOptions(_Section):
    n_r: int = Field(64, ge=2, description="Radial nodes of the disk grid")
    n_theta: int = Field(128, ge=4, description="Angular nodes of the disk grid")

    def disk_grid(self):
        return DiskGrid(self.n_r, self.n_theta)


class DomainOptions(_Section):
    kind: Literal["disk", "square", "slit", "file"] = "disk"
    samples: int = Field(256, ge=8, description="Boundary vertices")
    radius: float = Field(1.0, gt=0.0)
    side: float = Field(1.0, gt=0.0)
    slit_width: float = Field(1e-3, gt=0.0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _file_exists(self):
        if self.kind == "file" and (self.path is None or not os.path.isfile(self.path)):
            raise ValueError(f"domain file not found: {self.path}")
        return self


class MatrixOptions(_Section):
    kind: Literal["identity", "radial_stretch", "constant"] = "identity"
    K: float = Field(2.0, ge=1.0, description="Radial stretch factor")
    a11: float = 1.0
    a12: float = 0.0
    a22: float = 1.0
    closed_form: bool = Field(False, description="Use the exact radial stretch map")


class BoundaryOptions(_Section):
    kind: Literal["constant", "cos", "sin", "file"] = "constant"
    value: float = Field(1.0, description="Constant value or amplitude")
    samples: int = Field(256, ge=16)
    on_circle: bool = True
    path: Optional[str] = None

    @field_validator("samples")
    @classmethod
    def _power_of_two(cls, m):
        if m & (m - 1):
            raise ValueError(f"boundary samples must be a power of two, got {m}")
        return m

    @model_validator(mode="after")
    def _file_exists(self):
        if self.kind == "file" and (self.path is None or not os.path.isfile(self.path)):
            raise ValueError(f"boundary file not found: {self.path}")
        return self


class NonlinearityOptions(_Section):
    kind: Literal["zero", "constant", "power", "signed_power", "exponential", "linear"] = "zero"
    q: float = 0.5
    scale: float = 1.0
    value: float = 0.0
    delta: float = 0.1
    sign: int = 1
    clamp: Optional[float] = 10.0


class MultiplierOptions(_Section):
    value: float = Field(1.0, description="Constant multiplier h (disk) or H (domain)")


class QhbOptions(_Section):
    z0_re: Optional[float] = None
    z0_im: Optional[float] = None
    resolution: Optional[float] = Field(None, gt=0.0)
    sample_count: int = Field(256, ge=8)
    stencil: int = 16
    seed: int = 0

    @field_validator("stencil")
    @classmethod
    def _known_stencil(cls, stencil):
        if stencil not in (8, 16):
            raise ValueError(f"stencil must be 8 or 16, got {stencil}")
        return stencil

    @property
    def z0(self):
        if self.z0_re is None and self.z0_im is None:
            return None
        return complex(self.z0_re or 0.0, self.z0_im or 0.0)


class VerifyOptions(_Section):
    directory: Optional[str] = None
    residual_tol: float = Field(1e-2, gt=0.0)
    jacobian_tol: float = Field(5e-2, gt=0.0)
    profile_tol: float = Field(1e-2, gt=0.0)


class RunConfig(_Section):
    mode: Literal[MODES]
    grid: GridOptions = GridOptions()
    domain: DomainOptions = DomainOptions()
    matrix: MatrixOptions = MatrixOptions()
    boundary: BoundaryOptions = BoundaryOptions()
    nonlinearity: NonlinearityOptions = NonlinearityOptions()
    multiplier: MultiplierOptions = MultiplierOptions()
    solver: ContinuationOptions = ContinuationOptions()
    beltrami: BeltramiOptions = BeltramiOptions()
    qhyp: QhbOptions = QhbOptions()
    verify: VerifyOptions = VerifyOptions()

    @model_validator(mode="after")
    def _mode_inputs(self):
        if self.mode == "verify":
            if self.verify.directory is None or not os.path.isdir(self.verify.directory):
                raise ValueError(f"verify needs an existing [verify] directory, got {self.verify.directory}")
        return self


SECTIONS = tuple(name for name in RunConfig.model_fields if name != "mode")


def _apply_override(parser, override):
    key, sep, value = override.partition("=")
    section, dot, option = key.strip().partition(".")
    if not sep or not dot or not option:
        raise ConfigError(f"override must look like section.key=value, got {override!r}")
    if not parser.has_section(section):
        parser.add_section(section)
    parser.set(section, option, value.strip())


def load_config(path=None, overrides=(), seed=None):
    """Parse an INI run file, apply overrides and validate every section."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        parser.read(path)
    for override in overrides:
        _apply_override(parser, override)

    data = {}
    for section in parser.sections():
        if section == "run":
            continue
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        data[section] = {
            k: None if v.strip().lower() in ("", "none") else v.strip()
            for k, v in parser.items(section)
        }
    mode = parser.get("run", "mode", fallback=None)
    if mode is None:
        raise ConfigError("missing [run] mode")

    for section in ("solver", "qhyp"):
        if seed is not None:
            data.setdefault(section, {})["seed"] = seed
        elif env_seed() is not None:
            data.setdefault(section, {}).setdefault("seed", env_seed())
    return RunConfig.model_validate({"mode": mode, **data})


def write_config(config: RunConfig, path):
    """Write the effective configuration back as INI."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["run"] = {"mode": config.mode}
    for section in SECTIONS:
        values = getattr(config, section).model_dump()
        parser[section] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in values.items() if v is not None}
    with open(path, "w") as f:
        parser.write(f)


def build_domain(opts: DomainOptions):
    if opts.kind == "disk":
        return disk(opts.radius, opts.samples)
    if opts.kind == "square":
        return square(opts.side, max(opts.samples // 4, 2))
    if opts.kind == "slit":
        return slit_disk(opts.samples, opts.slit_width)
    return read_jordan_domain(opts.path)


def build_matrix(opts: MatrixOptions):
    if opts.kind == "identity":
        return MatrixField.identity()
    if opts.kind == "constant":
        return MatrixField.constant(opts.a11, opts.a12, opts.a22)
    return radial_stretch_reference(opts.K).matrix()


def build_boundary(opts: BoundaryOptions):
    if opts.kind == "file":
        return read_boundary_data(opts.path)
    wave = {"constant": lambda t: np.ones_like(t), "cos": np.cos, "sin": np.sin}[opts.kind]
    return BoundaryData.from_function(lambda t: opts.value * wave(t), opts.samples, opts.on_circle)


def build_nonlinearity(opts: NonlinearityOptions):
    if opts.kind == "zero":
        return make_constant(0.0)
    if opts.kind == "constant":
        return make_constant(opts.value)
    if opts.kind == "power":
        return make_power(opts.q, opts.scale)
    if opts.kind == "signed_power":
        return make_signed_power(opts.q, opts.scale)
    if opts.kind == "exponential":
        return make_exponential(opts.delta, opts.sign, opts.clamp)
    return make_linear(opts.scale)


def build_multiplier(opts: MultiplierOptions, grid: DiskGrid | None = None):
    """h on a disk grid when one is given, otherwise the domain multiplier H (None for H = 1)."""
    if grid is not None:
        return ScalarField(grid, np.full(grid.shape, opts.value))
    if opts.value == 1.0:
        return None
    return lambda z: np.full(np.shape(z), opts.value)
