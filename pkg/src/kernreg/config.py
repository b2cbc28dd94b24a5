"""Run configuration: a TOML file with one table per section.

Example::

    [kernel]
    name = "exponential"
    length = 1.0

    [domain]
    lower = [0.0]
    upper = [1.0]

    [bc]
    kind = "dirichlet"

    [basis]
    J = 2000

Omitted sections and keys take the defaults below; unknown keys are errors.
Coefficients of a variable-coefficient operator may be given as expressions
in ``x`` using ``pi``, ``e`` and the elementary numpy functions.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .elliptic import BoundaryCondition, EllipticCoefficients, EigenBasis, laplacian_basis, sturm_liouville_basis
from .errors import InvalidArgumentError
from .geometry import Domain, QuadratureRule, gauss_legendre_panels
from .kernels import KernelSpec, builtin_kernel, load_tabulated_kernel


class ConfigError(InvalidArgumentError):
    """Invalid configuration; ``field`` is the dotted key at fault."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class KernelSection:
    name: str = "exponential"
    length: float = 1.0
    nu: Optional[float] = None
    path: Optional[str] = None
    lower: Optional[float] = None
    upper: Optional[float] = None


@dataclass
class DomainSection:
    dim: Optional[int] = None
    lower: list = field(default_factory=lambda: [0.0])
    upper: list = field(default_factory=lambda: [1.0])


@dataclass
class BcSection:
    kind: str = "dirichlet"
    c0: Optional[float] = None


@dataclass
class BasisSection:
    source: str = "laplacian"
    J: int = 200
    mesh_M: int = 2000
    a: str = "1"
    c: str = "0"
    lambda0: Optional[float] = None


@dataclass
class QuadratureSection:
    panels: Optional[int] = None
    panels_per_period: float = 1.0
    order: int = 10
    diagonal_split: Optional[bool] = None


@dataclass
class DiagnosticsSection:
    r_grid: list = field(default_factory=lambda: [0.0, 0.25, 0.4, 0.6, 0.75, 1.0, 1.25, 1.75, 2.25])
    s_grid: list = field(default_factory=lambda: [0.0, 0.25])
    truncations: Optional[list] = None
    kind: str = "trace"
    sharp_rstar: Optional[float] = None


@dataclass
class SpdeSection:
    T: float = 1.0
    steps: int = 1
    J: Optional[int] = None  # default min(100, basis.J)
    M: int = 0
    seed: int = 0
    J_list: Optional[list] = None


@dataclass
class OutputSection:
    directory: Optional[str] = None
    formats: list = field(default_factory=lambda: ["json", "csv"])


@dataclass
class RunConfig:
    kernel: KernelSection = field(default_factory=KernelSection)
    domain: DomainSection = field(default_factory=DomainSection)
    bc: BcSection = field(default_factory=BcSection)
    basis: BasisSection = field(default_factory=BasisSection)
    quadrature: QuadratureSection = field(default_factory=QuadratureSection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    spde: SpdeSection = field(default_factory=SpdeSection)
    output: OutputSection = field(default_factory=OutputSection)
    source: Optional[str] = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("source")
        return d

    # ------------------------------------------------------------------
    # builders

    def build_domain(self) -> Domain:
        return Domain(tuple(self.domain.lower), tuple(self.domain.upper))

    def build_bc(self) -> BoundaryCondition:
        if self.bc.kind == "neumann":
            return BoundaryCondition.neumann(1.0 if self.bc.c0 is None else self.bc.c0)
        return BoundaryCondition.dirichlet()

    def build_kernel(self) -> KernelSpec:
        k = self.kernel
        dim = self.build_domain().dim
        if k.name == "tabulated":
            path = Path(k.path)
            if not path.is_absolute() and self.source:
                path = Path(self.source).parent / path
            return load_tabulated_kernel(path)
        params = {"length": k.length}
        if k.nu is not None:
            params["nu"] = k.nu
        if k.name in ("brownian_bridge", "brownian_motion"):
            dom = self.build_domain()
            params = {"lower": dom.lower[0] if k.lower is None else k.lower}
            if k.name == "brownian_bridge":
                params["upper"] = dom.upper[0] if k.upper is None else k.upper
        return builtin_kernel(k.name, dim=dim, **params)

    def build_basis(self, J: Optional[int] = None) -> EigenBasis:
        J = self.basis.J if J is None else J
        domain, bc = self.build_domain(), self.build_bc()
        if self.basis.source == "laplacian":
            return laplacian_basis(domain, bc, J)
        a, c = coefficient(self.basis.a, "basis.a"), coefficient(self.basis.c, "basis.c")
        lam0 = self.basis.lambda0
        if lam0 is None:
            xs = np.linspace(domain.lower[0], domain.upper[0], 1025)
            lam0 = float(np.min(a(xs)))
        coeffs = EllipticCoefficients(a, c, lam0)
        coeffs.check(domain, bc)
        return sturm_liouville_basis(domain, coeffs, bc, self.basis.mesh_M, J)

    def build_rule(self, basis: Optional[EigenBasis] = None) -> Optional[QuadratureRule]:
        """Explicit rule when ``quadrature.panels`` is set, else None (automatic)."""
        if self.quadrature.panels is None:
            if basis is None:
                return None
            from .analysis import auto_rule

            return auto_rule(basis, None, self.quadrature.panels_per_period, self.quadrature.order)
        return gauss_legendre_panels(self.build_domain(), self.quadrature.panels, self.quadrature.order)


_EXPR_NAMES = {
    "pi": math.pi,
    "e": math.e,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "where": np.where,
    "minimum": np.minimum,
    "maximum": np.maximum,
}


def coefficient(expr, field_name: str = "coefficient"):
    """Vectorized function of ``x`` from a number or an expression string."""
    if isinstance(expr, (int, float)):
        value = float(expr)
        return lambda x: np.full(np.shape(x)[:1], value)
    text = str(expr)
    if "__" in text or "lambda" in text:
        raise ConfigError(field_name, f"disallowed expression {text!r}")
    try:
        code = compile(text, f"<{field_name}>", "eval")
    except SyntaxError as exc:
        raise ConfigError(field_name, f"cannot parse {text!r}: {exc.msg}") from None
    for name in code.co_names:
        if name not in _EXPR_NAMES and name != "x":
            raise ConfigError(field_name, f"unknown name {name!r} in {text!r}")

    def f(x):
        x = np.asarray(x, dtype=float)
        x = x[:, 0] if x.ndim == 2 else x
        return np.broadcast_to(np.asarray(eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "x": x}), dtype=float), x.shape)

    try:
        f(np.linspace(0.0, 1.0, 3))
    except Exception as exc:
        raise ConfigError(field_name, f"cannot evaluate {text!r}: {exc}") from None
    return f


_SECTION_TYPES = {
    "kernel": KernelSection,
    "domain": DomainSection,
    "bc": BcSection,
    "basis": BasisSection,
    "quadrature": QuadratureSection,
    "diagnostics": DiagnosticsSection,
    "spde": SpdeSection,
    "output": OutputSection,
}
_KERNELS = ("exponential", "gaussian", "matern", "brownian_bridge", "brownian_motion", "tabulated")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _number_list(v, name: str, integer: bool = False) -> list:
    if not isinstance(v, list) or not all(_is_number(x) for x in v):
        raise ConfigError(name, "expected a list of numbers")
    if integer and not all(float(x).is_integer() for x in v):
        raise ConfigError(name, "expected a list of integers")
    return [int(x) for x in v] if integer else [float(x) for x in v]


def _typed(section: str, key: str, value):
    name = f"{section}.{key}"
    ann = {f.name: f.type for f in dataclasses.fields(_SECTION_TYPES[section])}[key]
    if value is None:
        return None
    if "list" in ann:
        return value
    if "bool" in ann:
        if not isinstance(value, bool):
            raise ConfigError(name, f"expected true/false, got {value!r}")
        return value
    if "int" in ann:
        if not _is_number(value) or not float(value).is_integer():
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    if "float" in ann:
        if not _is_number(value):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if key in ("a", "c"):
        if not (_is_number(value) or isinstance(value, str)):
            raise ConfigError(name, f"expected a number or expression string, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ConfigError(name, f"expected a string, got {value!r}")
    return value


def config_from_dict(data: dict, source: Optional[str] = None) -> RunConfig:
    cfg = RunConfig(source=source)
    for section, table in data.items():
        if section not in _SECTION_TYPES:
            raise ConfigError(section, f"unknown section (allowed: {', '.join(_SECTION_TYPES)})")
        if not isinstance(table, dict):
            raise ConfigError(section, "expected a table")
        obj = getattr(cfg, section)
        allowed = {f.name for f in dataclasses.fields(obj)}
        for key, value in table.items():
            if key not in allowed:
                raise ConfigError(f"{section}.{key}", f"unknown key (allowed: {', '.join(sorted(allowed))})")
            setattr(obj, key, _typed(section, key, value))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Semantic checks; raises ConfigError naming the offending field."""
    k = cfg.kernel
    if k.name not in _KERNELS:
        raise ConfigError("kernel.name", f"unknown kernel {k.name!r} (allowed: {', '.join(_KERNELS)})")
    if not k.length > 0:
        raise ConfigError("kernel.length", f"must be positive, got {k.length}")
    if k.name == "matern":
        if k.nu is None:
            raise ConfigError("kernel.nu", "required for the matern kernel")
        if not k.nu > 0:
            raise ConfigError("kernel.nu", f"must be positive, got {k.nu}")
    elif k.nu is not None:
        raise ConfigError("kernel.nu", f"only meaningful for the matern kernel, not {k.name!r}")
    if k.name == "tabulated" and not k.path:
        raise ConfigError("kernel.path", "required for a tabulated kernel")

    lower = _number_list(cfg.domain.lower, "domain.lower")
    upper = _number_list(cfg.domain.upper, "domain.upper")
    if len(lower) != len(upper) or len(lower) not in (1, 2):
        raise ConfigError("domain.upper", "lower and upper must both have length 1 or 2")
    if cfg.domain.dim is not None and cfg.domain.dim != len(lower):
        raise ConfigError("domain.dim", f"is {cfg.domain.dim} but bounds have length {len(lower)}")
    if any(not a < b for a, b in zip(lower, upper)):
        raise ConfigError("domain.upper", "each upper bound must exceed the lower bound")
    cfg.domain.lower, cfg.domain.upper = lower, upper

    if cfg.bc.kind not in ("dirichlet", "neumann"):
        raise ConfigError("bc.kind", f"must be 'dirichlet' or 'neumann', got {cfg.bc.kind!r}")
    if cfg.bc.c0 is not None and not cfg.bc.c0 > 0:
        raise ConfigError("bc.c0", f"must be positive, got {cfg.bc.c0}")

    b = cfg.basis
    if b.source not in ("laplacian", "sturm_liouville"):
        raise ConfigError("basis.source", f"must be 'laplacian' or 'sturm_liouville', got {b.source!r}")
    if b.J < 1:
        raise ConfigError("basis.J", f"must be positive, got {b.J}")
    if b.source == "sturm_liouville":
        if len(lower) != 1:
            raise ConfigError("basis.source", "variable coefficients are supported in 1D only")
        if b.J > b.mesh_M / 4:
            raise ConfigError("basis.mesh_M", f"must be at least 4*J = {4 * b.J}")
        coefficient(b.a, "basis.a")
        coefficient(b.c, "basis.c")
    elif (b.a, b.c) != ("1", "0"):
        # constant coefficients only: a = 1, c = c0 (neumann) or 0
        raise ConfigError("basis.a", "coefficients apply to the sturm_liouville source only")

    q = cfg.quadrature
    if q.panels is not None and q.panels < 1:
        raise ConfigError("quadrature.panels", f"must be positive, got {q.panels}")
    if not q.panels_per_period > 0:
        raise ConfigError("quadrature.panels_per_period", "must be positive")
    if q.order < 1:
        raise ConfigError("quadrature.order", f"must be positive, got {q.order}")

    d = cfg.diagnostics
    d.r_grid = _number_list(d.r_grid, "diagnostics.r_grid")
    d.s_grid = _number_list(d.s_grid, "diagnostics.s_grid")
    if len(d.r_grid) < 5 or any(b <= a for a, b in zip(d.r_grid, d.r_grid[1:])):
        raise ConfigError("diagnostics.r_grid", "needs at least 5 increasing values")
    if any(v < 0 for v in d.r_grid + d.s_grid):
        raise ConfigError("diagnostics.r_grid", "exponents must be nonnegative")
    if d.truncations is not None:
        d.truncations = _number_list(d.truncations, "diagnostics.truncations", integer=True)
        if not d.truncations or d.truncations[0] < 1 or any(b <= a for a, b in zip(d.truncations, d.truncations[1:])):
            raise ConfigError("diagnostics.truncations", "must be positive and increasing")
        if d.truncations[-1] > b.J:
            raise ConfigError("diagnostics.truncations", f"largest truncation exceeds basis.J = {b.J}")
    if d.kind not in ("trace", "hs_diagonal"):
        raise ConfigError("diagnostics.kind", f"must be 'trace' or 'hs_diagonal', got {d.kind!r}")

    s = cfg.spde
    if not s.T > 0:
        raise ConfigError("spde.T", f"must be positive, got {s.T}")
    if s.steps < 1:
        raise ConfigError("spde.steps", f"must be at least 1, got {s.steps}")
    if s.J is None:
        s.J = min(100, b.J)
    if not 1 <= s.J <= b.J:
        raise ConfigError("spde.J", f"must lie in [1, basis.J = {b.J}], got {s.J}")
    if s.M < 0 or s.M == 1:
        raise ConfigError("spde.M", f"must be 0 (no Monte Carlo) or at least 2, got {s.M}")
    if s.seed < 0:
        raise ConfigError("spde.seed", f"must be nonnegative, got {s.seed}")
    if s.J_list is not None:
        s.J_list = _number_list(s.J_list, "spde.J_list", integer=True)
        if len(s.J_list) < 2 or s.J_list[0] < 1 or any(b2 <= a for a, b2 in zip(s.J_list, s.J_list[1:])):
            raise ConfigError("spde.J_list", "needs at least two increasing positive integers")
        if s.J_list[-1] >= b.J:
            raise ConfigError("spde.J_list", f"largest entry must be below basis.J = {b.J}")

    formats = cfg.output.formats
    if not isinstance(formats, list) or not set(formats) <= {"json", "csv"} or not formats:
        raise ConfigError("output.formats", "must be a non-empty subset of ['json', 'csv']")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None
    return config_from_dict(data, source=str(path))
