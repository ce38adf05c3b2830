"""Scenario parameters: schema, defaults, JSON loading and validation.

All quantities are held internally in linear units (watts, unitless
gains, meters).  The JSON file may give powers and gains in dB-style
units through an explicit key suffix, e.g. ``power_dbm`` or
``intercept_db``.  Unknown keys are rejected so a typo in a sweep file
fails loudly instead of silently falling back to a default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a config file cannot be parsed or violates a constraint."""


def db_to_linear(x_db: float) -> float:
    """Convert decibels to a linear power ratio."""
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    """Convert a linear power ratio to decibels (``x`` must be positive)."""
    if not x > 0:
        raise ValueError(f"linear_to_db requires a positive input, got {x!r}")
    return 10.0 * math.log10(x)


def dbm_to_watts(x_dbm: float) -> float:
    return db_to_linear(x_dbm - 30.0)


@dataclass(frozen=True)
class LinkParams:
    """One direction of the device/AP link.

    power: transmit power [W]; g_tx, g_rx: antenna gains (linear);
    noise_power: AWGN power [W]; intercept, exponent: path loss
    ``C * R**-alpha``; fading_rate: rate of the exponential ``|h|^2``.
    """

    power: float
    g_tx: float
    g_rx: float
    noise_power: float
    intercept: float
    exponent: float
    fading_rate: float

    def validate(self, name: str = "link") -> None:
        for field in ("power", "g_tx", "g_rx", "noise_power", "intercept", "fading_rate"):
            value = getattr(self, field)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name}.{field} must be > 0, got {value!r}")
        if not (math.isfinite(self.exponent) and self.exponent > 2):
            raise ConfigError(f"{name}.exponent must be > 2, got {self.exponent!r}")

    @property
    def gain_product(self) -> float:
        """P * G_t * G_r * C / sigma^2, the mean SNR at 1 m before fading."""
        return self.power * self.g_tx * self.g_rx * self.intercept / self.noise_power


@dataclass(frozen=True)
class FeedbackCodeParams:
    """Packet/code parameters and the logistic fit of the feedback threshold.

    ``u`` holds (u0, ..., u5) of the critical-SNR model
    ``1 / (exp(u0*eta + u1*a + u2*eta*a + u3) + u4) + u5`` (all in dB).
    """

    k_bits: int
    n_uses: int
    target_per: float
    a_ratio: int
    u: tuple[float, float, float, float, float, float]

    def validate(self) -> None:
        if not 0 < self.target_per < 1:
            raise ConfigError(f"code.target_per must lie in (0, 1), got {self.target_per!r}")
        if self.k_bits < 1:
            raise ConfigError(f"code.k_bits must be >= 1, got {self.k_bits!r}")
        if self.n_uses < self.k_bits:
            raise ConfigError(
                f"code.n_uses must be >= k_bits ({self.k_bits}), got {self.n_uses!r}"
            )
        if self.a_ratio < 1:
            raise ConfigError(f"code.a_ratio must be a positive integer, got {self.a_ratio!r}")
        if len(self.u) != 6 or not all(math.isfinite(c) for c in self.u):
            raise ConfigError(f"code.u must be six finite numbers, got {self.u!r}")
        u0, _, u2, _, u4, u5 = self.u
        if not u4 > 0:
            raise ConfigError(f"code.u[4] (u4) must be > 0, got {u4!r}")
        if not u5 < 0:
            raise ConfigError(f"code.u[5] (u5) must be < 0, got {u5!r}")
        if not u0 + u2 * self.a_ratio > 0:
            raise ConfigError(
                f"code.u: u0 + u2*a must be > 0 for a={self.a_ratio}, "
                f"got {u0 + u2 * self.a_ratio!r}"
            )


@dataclass(frozen=True)
class SystemConfig:
    uplink: LinkParams
    downlink: LinkParams
    code: FeedbackCodeParams
    ap_density: float
    region_radius: float
    quadrature_order: int = 16
    # far-field guard: distances below this are rejected / clamped
    min_distance: float = 0.1

    def validate(self) -> "SystemConfig":
        self.uplink.validate("uplink")
        self.downlink.validate("downlink")
        self.code.validate()
        if not (math.isfinite(self.ap_density) and self.ap_density > 0):
            raise ConfigError(f"ap_density must be > 0, got {self.ap_density!r}")
        if not (math.isfinite(self.region_radius) and self.region_radius > 0):
            raise ConfigError(f"region_radius must be > 0, got {self.region_radius!r}")
        if not 1 <= self.quadrature_order <= 64:
            raise ConfigError(
                f"quadrature_order must lie in [1, 64], got {self.quadrature_order!r}"
            )
        if not (math.isfinite(self.min_distance) and self.min_distance > 0):
            raise ConfigError(f"min_distance must be > 0, got {self.min_distance!r}")
        return self

    def replace(self, **changes: Any) -> "SystemConfig":
        """Return a validated copy with top-level fields replaced."""
        return dataclasses.replace(self, **changes).validate()

    def with_uplink_power(self, watts: float) -> "SystemConfig":
        return self.replace(uplink=dataclasses.replace(self.uplink, power=watts))

    def with_feedback_ratio(self, a: int) -> "SystemConfig":
        return self.replace(code=dataclasses.replace(self.code, a_ratio=a))

    def to_dict(self) -> dict:
        """Canonical linear-unit form; ``from_dict(to_dict())`` is lossless."""
        def link(p: LinkParams) -> dict:
            return {
                "power_w": p.power,
                "g_tx": p.g_tx,
                "g_rx": p.g_rx,
                "noise_power_w": p.noise_power,
                "intercept": p.intercept,
                "exponent": p.exponent,
                "fading_rate": p.fading_rate,
            }

        return {
            "uplink": link(self.uplink),
            "downlink": link(self.downlink),
            "code": {
                "k_bits": self.code.k_bits,
                "n_uses": self.code.n_uses,
                "target_per": self.code.target_per,
                "a_ratio": self.code.a_ratio,
                "u": list(self.code.u),
            },
            "ap_density": self.ap_density,
            "region_radius": self.region_radius,
            "quadrature_order": self.quadrature_order,
            "min_distance": self.min_distance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# key -> converter to the internal linear unit
_LINK_ALTERNATIVES: dict[str, dict[str, Any]] = {
    "power": {"power_w": float, "power_mw": lambda v: float(v) * 1e-3, "power_dbm": dbm_to_watts},
    "g_tx": {"g_tx": float, "g_tx_dbi": db_to_linear},
    "g_rx": {"g_rx": float, "g_rx_dbi": db_to_linear},
    "noise_power": {"noise_power_w": float, "noise_power_dbm": dbm_to_watts},
    "intercept": {"intercept": float, "intercept_db": db_to_linear},
    "exponent": {"exponent": float},
    "fading_rate": {"fading_rate": float},
}
_CODE_KEYS = {"k_bits", "n_uses", "target_per", "a_ratio", "u"}
_TOP_KEYS = {"uplink", "downlink", "code", "ap_density", "region_radius",
             "quadrature_order", "min_distance"}


def _as_number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return value


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _parse_link(raw: Any, base: LinkParams, name: str) -> LinkParams:
    if not isinstance(raw, dict):
        raise ConfigError(f"{name} must be an object")
    known = {key for alts in _LINK_ALTERNATIVES.values() for key in alts}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)}")
    values = dataclasses.asdict(base)
    for field, alts in _LINK_ALTERNATIVES.items():
        given = [key for key in alts if key in raw]
        if len(given) > 1:
            raise ConfigError(f"{name}.{field} given more than once: {', '.join(given)}")
        if given:
            key = given[0]
            values[field] = alts[key](_as_number(raw[key], f"{name}.{key}"))
    return LinkParams(**values)


def _parse_code(raw: Any, base: FeedbackCodeParams) -> FeedbackCodeParams:
    if not isinstance(raw, dict):
        raise ConfigError("code must be an object")
    unknown = sorted(set(raw) - _CODE_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s) in code: {', '.join(unknown)}")
    values = dataclasses.asdict(base)
    if "k_bits" in raw:
        values["k_bits"] = _as_int(raw["k_bits"], "code.k_bits")
    if "n_uses" in raw:
        values["n_uses"] = _as_int(raw["n_uses"], "code.n_uses")
    if "a_ratio" in raw:
        values["a_ratio"] = _as_int(raw["a_ratio"], "code.a_ratio")
    if "target_per" in raw:
        values["target_per"] = float(_as_number(raw["target_per"], "code.target_per"))
    if "u" in raw:
        u = raw["u"]
        if not isinstance(u, list) or len(u) != 6:
            raise ConfigError(f"code.u must be a list of six numbers, got {u!r}")
        values["u"] = tuple(float(_as_number(c, f"code.u[{i}]")) for i, c in enumerate(u))
    values["u"] = tuple(values["u"])
    return FeedbackCodeParams(**values)


def config_from_dict(raw: Any, base: SystemConfig | None = None) -> SystemConfig:
    """Build a validated config from parsed JSON, filling omitted fields from ``base``."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    if base is None:
        base = default_config()
    cfg = SystemConfig(
        uplink=_parse_link(raw.get("uplink", {}), base.uplink, "uplink"),
        downlink=_parse_link(raw.get("downlink", {}), base.downlink, "downlink"),
        code=_parse_code(raw.get("code", {}), base.code),
        ap_density=float(_as_number(raw.get("ap_density", base.ap_density), "ap_density")),
        region_radius=float(
            _as_number(raw.get("region_radius", base.region_radius), "region_radius")
        ),
        quadrature_order=_as_int(
            raw.get("quadrature_order", base.quadrature_order), "quadrature_order"
        ),
        min_distance=float(
            _as_number(raw.get("min_distance", base.min_distance), "min_distance")
        ),
    )
    return cfg.validate()


def load_config(path: str | Path) -> SystemConfig:
    """Load and validate a JSON scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return config_from_dict(raw)


_DEFAULT: SystemConfig | None = None


def default_config() -> SystemConfig:
    """The shipped scenario (see data/default_config.json)."""
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("feedback_coverage").joinpath(
            "data/default_config.json").read_text(encoding="utf-8")
        raw = json.loads(text)
        # the shipped file is complete, so parse it against a placeholder base
        placeholder_link = LinkParams(1.0, 1.0, 1.0, 1.0, 1.0, 4.0, 1.0)
        placeholder = SystemConfig(
            uplink=placeholder_link,
            downlink=placeholder_link,
            code=FeedbackCodeParams(1, 1, 0.5, 1, (1.0, 0.0, 0.0, 0.0, 1.0, -1.0)),
            ap_density=1.0,
            region_radius=1.0,
        )
        _DEFAULT = config_from_dict(raw, base=placeholder)
    return _DEFAULT


DEFAULT_UPLINK_POWERS_W = (0.5e-3, 1e-3, 2e-3)
