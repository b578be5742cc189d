"""Line-oriented run configuration: dotted keys, strict validation.

The format is one `key = value` per line, `#` comments, values kept as
strings until a typed accessor converts them.  Keys are checked against a
fixed registry at parse time so typos fail before any computation, and every
conversion error names the offending key.  Serialization writes keys in
sorted order with the raw value text, which makes parse -> serialize ->
parse idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError
from .fields import (
    VectorField,
    builtin_field,
    builtin_potential,
    gradient_field,
)
from .raytransform import AcquisitionSet, Quadrature, acquisition_n2, acquisition_n3
from .scenarios import CylinderScenario, GammaSurface

ALLOWED_KEYS = frozenset(
    {
        "n",
        "seed",
        "output",
        "field.name",
        "field.potential",
        "field.grid",
        "field.width",
        "field.center",
        "field.amplitude",
        "field.envelope_radius",
        "acquisition.origin",
        "acquisition.spacing",
        "acquisition.counts",
        "acquisition.patch.center",
        "acquisition.patch.halfwidth",
        "acquisition.patch.count",
        "acquisition.include_opposite",
        "acquisition.a_max",
        "acquisition.a_count",
        "acquisition.b_count",
        "quadrature.rule",
        "quadrature.abs_tol",
        "quadrature.max_evals",
        "spectral.delta",
        "spectral.circle_count",
        "spectral.on_empty",
        "slice.counts",
        "slice.n_dirs",
        "slice.bins_per_dir",
        "slice.refine",
        "surface.kind",
        "surface.center",
        "surface.c",
        "surface.rho",
        "surface.R",
        "cylinder.height",
        "cylinder.center",
        "cylinder.radius",
        "support.points_per_axis",
    }
)


def parse_config(text: str) -> dict[str, str]:
    """Parse config text into a raw key -> value string map."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key not in ALLOWED_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key '{key}'")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate config key '{key}'")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for '{key}'")
        out[key] = value
    return out


def serialize_config(cfg: dict[str, str]) -> str:
    """Canonical text form: sorted keys, raw values."""
    return "".join(f"{k} = {cfg[k]}\n" for k in sorted(cfg))


def load_config(path) -> "RunConfig":
    with open(path, "r", encoding="utf-8") as fh:
        return RunConfig(parse_config(fh.read()))


_REQUIRED = object()


@dataclass
class RunConfig:
    """Typed view over a raw config map; accessors raise naming the key."""

    raw: dict[str, str]
    overrides: dict[str, str] = dc_field(default_factory=dict)

    def _get(self, key: str, default=_REQUIRED) -> str:
        if key in self.overrides:
            return self.overrides[key]
        if key in self.raw:
            return self.raw[key]
        if default is _REQUIRED:
            raise ConfigError(f"missing required config key '{key}'")
        return default

    def has(self, key: str) -> bool:
        return key in self.overrides or key in self.raw

    def get_int(self, key: str, default=_REQUIRED) -> int:
        v = self._get(key, default)
        if isinstance(v, int):
            return v
        try:
            return int(v)
        except ValueError as exc:
            raise ConfigError(f"config key '{key}': expected an integer, got {v!r}") from exc

    def get_float(self, key: str, default=_REQUIRED) -> float:
        v = self._get(key, default)
        if isinstance(v, float):
            return v
        try:
            return float(v)
        except ValueError as exc:
            raise ConfigError(f"config key '{key}': expected a number, got {v!r}") from exc

    def get_bool(self, key: str, default=_REQUIRED) -> bool:
        v = self._get(key, default)
        if isinstance(v, bool):
            return v
        if v in ("true", "false"):
            return v == "true"
        raise ConfigError(f"config key '{key}': expected true or false, got {v!r}")

    def get_str(self, key: str, default=_REQUIRED) -> str:
        return self._get(key, default)

    def get_floats(self, key: str, count: int | None = None, default=_REQUIRED):
        v = self._get(key, default)
        if not isinstance(v, str):
            return v
        try:
            vals = tuple(float(p) for p in v.split(","))
        except ValueError as exc:
            raise ConfigError(
                f"config key '{key}': expected comma-separated numbers, got {v!r}"
            ) from exc
        if count is not None and len(vals) != count:
            raise ConfigError(f"config key '{key}': expected {count} values, got {len(vals)}")
        return vals

    def get_ints(self, key: str, count: int | None = None, default=_REQUIRED):
        v = self._get(key, default)
        if not isinstance(v, str):
            return v
        try:
            vals = tuple(int(p) for p in v.split(","))
        except ValueError as exc:
            raise ConfigError(
                f"config key '{key}': expected comma-separated integers, got {v!r}"
            ) from exc
        if count is not None and len(vals) != count:
            raise ConfigError(f"config key '{key}': expected {count} values, got {len(vals)}")
        return vals

    # --- typed sections -----------------------------------------------------

    @property
    def n(self) -> int:
        n = self.get_int("n")
        if n not in (2, 3):
            raise ConfigError("config key 'n': must be 2 or 3")
        return n

    @property
    def seed(self) -> int:
        return self.get_int("seed", 0)

    @property
    def output(self) -> str:
        return self.get_str("output", "out")

    def field_kind(self) -> str:
        kinds = [k for k in ("field.name", "field.potential", "field.grid") if self.has(k)]
        if len(kinds) != 1:
            raise ConfigError(
                "exactly one of field.name, field.potential, field.grid is required"
            )
        return kinds[0]

    def build_field(self) -> tuple[VectorField, bool]:
        """The test field and whether it carries exact analytic rules."""
        kind = self.field_kind()
        n = self.n
        if kind == "field.name":
            center = self.get_floats("field.center", n + 1, None)
            try:
                f = builtin_field(
                    self.get_str("field.name"),
                    n,
                    width=self.get_float("field.width", 1.0),
                    center=center,
                    amplitude=self.get_float("field.amplitude", 1.0),
                    envelope_radius=(
                        self.get_float("field.envelope_radius")
                        if self.has("field.envelope_radius")
                        else None
                    ),
                )
            except KeyError as exc:
                raise ConfigError(f"config key 'field.name': {exc.args[0]}") from exc
            return f, True
        if kind == "field.potential":
            try:
                phi = builtin_potential(self.get_str("field.potential"), n)
            except KeyError as exc:
                raise ConfigError(f"config key 'field.potential': {exc.args[0]}") from exc
            return gradient_field(phi), True
        from .fields import SampledScalar, SupportEnvelope
        from .gridio import read_grid

        g = read_grid(self.get_str("field.grid"))
        if g.values.shape[0] != n + 1:
            raise ConfigError(
                f"config key 'field.grid': grid has {g.values.shape[0]} components, "
                f"need {n + 1}"
            )
        comps = tuple(
            SampledScalar(g.origin, g.spacing, np.ascontiguousarray(g.values[i].real))
            for i in range(n + 1)
        )
        f = VectorField(
            comps,
            envelope=SupportEnvelope(0.0, self.get_float("field.envelope_radius")),
            name="grid",
        )
        return f, False

    def build_acquisition(self) -> AcquisitionSet:
        n = self.n
        origin = self.get_floats("acquisition.origin", n)
        spacing = self.get_floats("acquisition.spacing", n)
        counts = self.get_ints("acquisition.counts", n)
        if any(c < 2 for c in counts):
            raise ConfigError("config key 'acquisition.counts': counts must be >= 2")
        if any(h <= 0 for h in spacing):
            raise ConfigError("config key 'acquisition.spacing': spacing must be positive")
        if n == 2:
            return acquisition_n2(
                origin,
                spacing,
                counts,
                self.get_float("acquisition.patch.halfwidth"),
                self.get_int("acquisition.patch.count"),
                center=self.get_float("acquisition.patch.center", 0.0),
                include_opposite=self.get_bool("acquisition.include_opposite", True),
            )
        return acquisition_n3(
            origin,
            spacing,
            counts,
            self.get_float("acquisition.a_max"),
            self.get_int("acquisition.a_count"),
            self.get_int("acquisition.b_count"),
        )

    def build_quadrature(self) -> Quadrature:
        rule = self.get_str("quadrature.rule", "adaptive")
        if rule not in ("adaptive", "simpson"):
            raise ConfigError(
                f"config key 'quadrature.rule': unknown rule {rule!r}"
            )
        return Quadrature(
            rule=rule,
            abs_tol=self.get_float("quadrature.abs_tol", 1e-8),
            max_evals=self.get_int("quadrature.max_evals", 4097),
        )

    @property
    def delta(self) -> float:
        d = self.get_float("spectral.delta", 0.1)
        if not 0.0 <= d < 1.0:
            raise ConfigError("config key 'spectral.delta': must lie in [0, 1)")
        return d

    @property
    def circle_count(self) -> int:
        return self.get_int("spectral.circle_count", 6)

    def build_surface(self) -> GammaSurface | None:
        if not self.has("surface.kind"):
            for key in ("surface.center", "surface.c", "surface.rho", "surface.R"):
                if self.has(key):
                    raise ConfigError(f"config key '{key}' requires surface.kind")
            return None
        kind = self.get_str("surface.kind")
        try:
            return GammaSurface(
                kind,
                self.get_floats("surface.center", self.n + 1),
                self.get_float("surface.c"),
                self.get_float("surface.rho"),
                R=self.get_float("surface.R") if self.has("surface.R") else None,
            )
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"surface config invalid: {exc}") from exc

    def build_cylinder(self) -> CylinderScenario | None:
        if not self.has("cylinder.height"):
            for key in ("cylinder.center", "cylinder.radius"):
                if self.has(key):
                    raise ConfigError(f"config key '{key}' requires cylinder.height")
            return None
        return CylinderScenario(
            self.get_float("cylinder.height"),
            self.get_floats("cylinder.center", self.n),
            self.get_float("cylinder.radius"),
        )
