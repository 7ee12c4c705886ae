"""Line-oriented `key = value` configuration with dotted sections.

Unknown keys are rejected; every key has a typed default. Numbers use float
syntax, booleans are true/false, lists are comma-separated. Blank lines and
full-line # comments are skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .grids import PeriodicGrid
from .models import FAMILIES, HamiltonianModel, make_model

_TWO_PI = 2.0 * math.pi


def _flt(s):
    return float(s)


def _intp(s):
    return int(s)


def _boolp(s):
    s = s.strip().lower()
    if s in ("true", "1", "yes", "on"):
        return True
    if s in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(tok) for tok in s.split(",") if tok.strip())


def _str(s):
    return s.strip()


# key -> (parser, default); None default means "derived later"
SCHEMA = {
    "model.family": (_str, None),
    "model.p0": (_flt, 2.0),
    "model.amplitude": (_flt, None),
    "model.lam": (_flt, 1.0),
    "model.v0": (_flt, 1.0),
    "model.c0": (_flt, 0.0),
    "model.quad": (_flt, 1.0),
    "model.uc": (_flt, 1.0),
    "model.p4": (_flt, 0.0),
    "model.drift1": (_flt, 0.0),
    "model.drift2": (_flt, 0.0),
    "model.offset": (_flt, 0.0),
    "model.v_max": (_flt, None),
    "model.lambda_bound": (_flt, None),
    "grid.d": (_intp, 1),
    "grid.n": (_intp, 256),
    "grid.length": (_flt, None),
    "grid.length2": (_flt, None),
    "time.dt": (_flt, 2e-3),
    "time.dt_max": (_flt, 5e-3),
    "time.t_max": (_flt, 20.0),
    "time.delta": (_flt, 1e-2),
    "search.n_v": (_intp, 33),
    "search.refine": (_boolp, True),
    "tol.fix": (_flt, 1e-6),
    "tol.blowup": (_flt, 1e6),
    "tol.clamp": (_flt, 5e-2),
    "tol.set": (_flt, 0.0),
    "tol.grad": (_flt, 0.0),
    "flow.dt": (_flt, 1e-3),
    "flow.t": (_flt, 5.0),
    "flow.x0": (_flt, 0.25),
    "flow.y0": (_flt, 0.0),
    "flow.mode": (_str, "backward"),
    "recur.t": (_flt, 30.0),
    "recur.r": (_flt, 0.0),
    "admissible.a_lo": (_flt, -10.0),
    "admissible.a_hi": (_flt, 10.0),
    "admissible.tol_a": (_flt, 1e-3),
    "admissible.tol_c": (_flt, 5e-3),
    "admissible.t_avg": (_flt, 10.0),
    "admissible.dt": (_flt, 5e-3),
    "action.x0": (_flt, 0.0),
    "action.y0": (_flt, 0.0),
    "action.u0": (_flt, 0.0),
    "action.times": (_floats, (1.0,)),
    "verify.seed": (_intp, 42),
    "verify.trials": (_intp, 20),
    "output.dir": (_str, "out"),
    "threads": (_intp, 0),
}

_MODEL_PARAM_KEYS = {
    "quadratic_contact": (),
    "manufactured": ("amplitude",),
    "pendulum_dissipative": ("p0",),
    "discounted_mechanical": ("lam", "v0", "c0"),
    "custom_coefficients": ("quad", "uc", "p4", "drift1", "drift2", "amplitude", "offset"),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def grid(self) -> PeriodicGrid:
        d = self["grid.d"]
        return PeriodicGrid((self["grid.n"],) * d, self.lengths())

    def lengths(self) -> tuple:
        d = self["grid.d"]
        fam = self["model.family"]
        default = _TWO_PI if fam == "pendulum_dissipative" else 1.0
        l1 = self["grid.length"] if self["grid.length"] is not None else default
        if d == 1:
            return (l1,)
        l2 = self["grid.length2"] if self["grid.length2"] is not None else l1
        return (l1, l2)

    def model(self) -> HamiltonianModel:
        fam = self["model.family"]
        params = {}
        for name in _MODEL_PARAM_KEYS[fam]:
            if name == "drift2" and self["grid.d"] == 1:
                continue
            val = self[f"model.{name}"]
            if val is not None:
                params[name] = val
        return make_model(
            fam,
            circle_lengths=self.lengths(),
            v_max=self["model.v_max"],
            lambda_bound=self["model.lambda_bound"],
            **params,
        )

    def op_kwargs(self) -> dict:
        return dict(
            n_v=self["search.n_v"],
            v_max=self.model().v_max,
            refine=self["search.refine"],
            dt_max=self["time.dt_max"],
        )


def parse_config(path) -> RunConfig:
    """Read, type, default-fill, and validate a configuration file."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    raw: dict[str, str] = {}
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {stripped!r}")
        key, _, val = stripped.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r}; valid keys: "
                + ", ".join(sorted(SCHEMA))
            )
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = val

    values = {}
    for key, (parser, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parser(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{path}: key {key!r}: {exc}") from None
        else:
            values[key] = default
    cfg = RunConfig(values)
    validate(cfg, path)
    return cfg


def validate(cfg: RunConfig, path="<config>") -> None:
    fam = cfg["model.family"]
    if fam is None:
        raise ConfigError(f"{path}: model.family is required")
    if fam not in FAMILIES:
        raise ConfigError(
            f"{path}: unknown family {fam!r}; valid families: {', '.join(FAMILIES)}"
        )
    if cfg["grid.d"] not in (1, 2):
        raise ConfigError(f"{path}: grid.d must be 1 or 2")
    if fam == "pendulum_dissipative" and cfg["grid.d"] != 1:
        raise ConfigError(f"{path}: pendulum_dissipative requires grid.d = 1")
    if cfg["grid.n"] < 8:
        raise ConfigError(f"{path}: grid.n must be at least 8")
    dt, dt_max = cfg["time.dt"], cfg["time.dt_max"]
    if not 0 < dt <= dt_max:
        raise ConfigError(f"{path}: need 0 < time.dt <= time.dt_max (= {dt_max})")
    if cfg["search.n_v"] < 3:
        raise ConfigError(f"{path}: search.n_v must be at least 3")
    if cfg["threads"] < 0:
        raise ConfigError(f"{path}: threads must be nonnegative")
    if not 0 < cfg["time.delta"] <= 0.1:
        raise ConfigError(f"{path}: need 0 < time.delta <= 0.1")
    model = cfg.model()  # raises ConfigError-compatible UsageError on bad params
    grid = cfg.grid()
    if model.v_max * dt > 4.0 * grid.min_spacing * (1 + 1e-12):
        raise ConfigError(
            f"{path}: locality guard v_max*dt <= 4h violated: "
            f"{model.v_max}*{dt} = {model.v_max * dt:.4g} > {4.0 * grid.min_spacing:.4g}"
        )
