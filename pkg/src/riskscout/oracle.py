"""Surrogate document-processing oracle.

A configuration is decoded into normalised latents (counts scaled to [0, 1],
noise level, split indicators, template one-hots). Each error component is a
clamped sum of coefficient-times-latent-product terms read from a landscape
profile, plus bounded render noise keyed on (bits, render_seed, component).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .schema import FeatureSchema, bits_to_str, decode

BUILTIN_PROFILES = ("idp-sim-v1",)

COUNT_LATENTS = {
    "MAX_KV": "kv_n",
    "MAX_TEXT": "text_n",
    "MAX_TBL_ROWS": "rows_n",
    "MAX_TBL_COLS": "cols_n",
    "MAX_SUMMARY_ROWS": "srows_n",
    "MAX_SUMMARY_COLS": "scols_n",
    "NUM_PAGES": "pages_n",
}
SCALAR_LATENTS = frozenset(
    list(COUNT_LATENTS.values()) + ["eta", "d", "s_soft", "s_hard", "cont", "slast"]
)
_TEMPLATE_LATENT = re.compile(r"^tmpl_(\d+)$")

DENSITY_REGIMES = ("LOW", "MEDIUM", "HIGH")
NOISE_REGIMES = ("NO", "LOW", "MID", "HIGH")
LAYOUTS = ("NO_SPLIT", "SOFT_SPLIT", "HARD_SPLIT")

# Feature groups whose joint value frequency drives rarity: the content-density
# counts, and noise together with pagination.
DEFAULT_RARITY_GROUPS = (
    ("MAX_KV", "MAX_TEXT", "MAX_TBL_ROWS", "MAX_TBL_COLS", "MAX_SUMMARY_ROWS", "MAX_SUMMARY_COLS"),
    ("NOISE_LEVEL", "NUM_PAGES", "TABLE_CONTINUE_PAGE", "SUMMARY_LAST_PAGE"),
)


class ProfileError(ValueError):
    pass


class MissingStats(KeyError):
    pass


def _parse_product(expr: str) -> tuple[str, ...]:
    expr = expr.replace(" ", "")
    if expr in ("", "1"):
        return ()
    names = tuple(expr.split("*"))
    for n in names:
        if n not in SCALAR_LATENTS and not _TEMPLATE_LATENT.match(n):
            raise ProfileError(f"unknown latent {n!r} in term {expr!r}")
    return names


@dataclass(frozen=True)
class LandscapeProfile:
    name: str
    component_names: tuple[str, ...]
    weights: tuple[float, ...]
    thresholds: tuple[float, ...]
    lam: float
    noise_sigma: float
    term_table: tuple[tuple[tuple[float, tuple[str, ...]], ...], ...]

    def __post_init__(self):
        k = len(self.component_names)
        if k < 1:
            raise ProfileError("profile needs at least one component")
        if not (len(self.weights) == len(self.thresholds) == len(self.term_table) == k):
            raise ProfileError("weights, thresholds and terms must align with components")
        if len(set(self.component_names)) != k:
            raise ProfileError("duplicate component names")
        if any(not np.isfinite(w) or w < 0 for w in self.weights):
            raise ProfileError("weights must be finite and non-negative")
        if any(not 0.0 < t < 1.0 for t in self.thresholds):
            raise ProfileError("thresholds must lie strictly inside (0, 1)")
        if self.lam < 0 or self.noise_sigma < 0:
            raise ProfileError("lambda and noise_sigma must be non-negative")

    @property
    def K(self) -> int:
        return len(self.component_names)

    def with_noise(self, noise_sigma: float) -> "LandscapeProfile":
        return LandscapeProfile(
            self.name, self.component_names, self.weights, self.thresholds,
            self.lam, noise_sigma, self.term_table,
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lambda": self.lam,
            "noise_sigma": self.noise_sigma,
            "components": [
                {
                    "name": name,
                    "weight": w,
                    "threshold": t,
                    "terms": [[c, "*".join(p) or "1"] for c, p in terms],
                }
                for name, w, t, terms in zip(
                    self.component_names, self.weights, self.thresholds, self.term_table
                )
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "LandscapeProfile":
        comps = doc.get("components") or []
        try:
            return cls(
                name=doc.get("name", "custom"),
                component_names=tuple(c["name"] for c in comps),
                weights=tuple(float(c["weight"]) for c in comps),
                thresholds=tuple(float(c["threshold"]) for c in comps),
                lam=float(doc.get("lambda", 0.0)),
                noise_sigma=float(doc.get("noise_sigma", 0.0)),
                term_table=tuple(
                    tuple((float(coef), _parse_product(expr)) for coef, expr in c["terms"])
                    for c in comps
                ),
            )
        except (KeyError, TypeError) as exc:
            raise ProfileError(f"malformed profile: {exc}") from exc


def load_profile(name_or_path: str | Path) -> LandscapeProfile:
    if str(name_or_path) in BUILTIN_PROFILES:
        text = (
            resources.files("riskscout.data.profiles")
            .joinpath(f"{name_or_path}.json")
            .read_text()
        )
        return LandscapeProfile.from_dict(json.loads(text))
    path = Path(name_or_path)
    if not path.exists():
        raise ProfileError(f"unknown profile {name_or_path!r}")
    return LandscapeProfile.from_dict(json.loads(path.read_text()))


@dataclass(frozen=True)
class ReferenceStats:
    """Per-feature value frequencies plus the feature groups rarity is scored on.

    A group's joint frequency is the product of its members' marginal
    frequencies; with a single-feature group this is just that feature's
    frequency.
    """

    frequencies: Mapping[str, tuple[float, ...]]
    groups: tuple[tuple[str, ...], ...]

    def to_dict(self) -> dict:
        return {
            "groups": [list(g) for g in self.groups],
            "frequencies": {k: list(v) for k, v in self.frequencies.items()},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ReferenceStats":
        return cls(
            frequencies={k: tuple(float(x) for x in v) for k, v in doc["frequencies"].items()},
            groups=tuple(tuple(g) for g in doc["groups"]),
        )


def uniform_stats(schema: FeatureSchema, groups=DEFAULT_RARITY_GROUPS) -> ReferenceStats:
    """Uniform per-value frequencies for every grouped feature present in the schema.

    Fixed features get frequency 1 on their value, so they add nothing to rarity.
    Groups left empty after dropping absent features are discarded.
    """
    freqs = {}
    kept = []
    for group in groups:
        members = tuple(n for n in group if n in schema)
        if not members:
            continue
        kept.append(members)
        for n in members:
            f = schema.feature(n)
            if f.is_fixed:
                freqs[n] = tuple(1.0 if v == f.fixed_value else 0.0 for v in range(f.cardinality))
            else:
                freqs[n] = (1.0 / f.cardinality,) * f.cardinality
    return ReferenceStats(frequencies=freqs, groups=tuple(kept))


def load_stats(path: str | Path) -> ReferenceStats:
    return ReferenceStats.from_dict(json.loads(Path(path).read_text()))


def derive_latents(features: Mapping[str, int], schema: FeatureSchema) -> dict[str, float]:
    lat = {}
    for feat, key in COUNT_LATENTS.items():
        lat[key] = _scaled(features, schema, feat)
    lat["eta"] = _scaled(features, schema, "NOISE_LEVEL")
    split = features.get("LAYOUT_SPLIT", 0)
    lat["s_soft"] = float(split == 1)
    lat["s_hard"] = float(split == 2)
    lat["cont"] = float(features.get("TABLE_CONTINUE_PAGE", 0) == 1)
    lat["slast"] = float(features.get("SUMMARY_LAST_PAGE", 0) == 1)
    if "TEMPLATE_ID" in schema:
        n_tmpl = schema.feature("TEMPLATE_ID").cardinality
        for t in range(n_tmpl):
            lat[f"tmpl_{t}"] = float(features["TEMPLATE_ID"] == t)
    lat["d"] = (
        lat["kv_n"]
        + lat["text_n"]
        + lat["rows_n"] * lat["cols_n"]
        + lat["srows_n"] * lat["scols_n"]
    ) / 4.0
    return lat


def _scaled(features, schema, name) -> float:
    if name not in schema:
        return 0.0
    card = schema.feature(name).cardinality
    return features[name] / (card - 1) if card > 1 else 0.0


def noise_draws(z, render_seed: int, k: int, sigma: float) -> np.ndarray:
    """Uniform(-sigma, sigma) draws for k components, keyed on (bits, render_seed)."""
    if sigma == 0.0:
        return np.zeros(k)
    key = int(bits_to_str(z) or "0", 2)
    ss = np.random.SeedSequence([render_seed & 0xFFFFFFFFFFFFFFFF, key, len(z)])
    return np.random.default_rng(ss).uniform(-sigma, sigma, size=k)


def component_errors(
    latents: Mapping[str, float],
    profile: LandscapeProfile,
    z=None,
    render_seed: int = 0,
) -> np.ndarray:
    eps = noise_draws(z if z is not None else [], render_seed, profile.K, profile.noise_sigma)
    r = np.empty(profile.K)
    for k, terms in enumerate(profile.term_table):
        total = 0.0
        for coef, prod in terms:
            v = coef
            for name in prod:
                v *= latents.get(name, 0.0)
            total += v
        r[k] = total + eps[k]
    return np.clip(r, 0.0, 1.0)


def rarity(features: Mapping[str, int], stats: ReferenceStats) -> float:
    if not stats.groups:
        return 0.0
    scores = []
    for group in stats.groups:
        joint = 1.0
        for name in group:
            if name not in stats.frequencies:
                raise MissingStats(name)
            joint *= stats.frequencies[name][features[name]]
        scores.append(1.0 - joint)
    return float(np.mean(scores))


def aggregate_risk(r: Sequence[float], rarity_score: float, profile: LandscapeProfile):
    base = float(sum(w * x for w, x in zip(profile.weights, r)))
    return base, base * (1.0 + profile.lam * rarity_score)


def signature(r: Sequence[float], profile: LandscapeProfile) -> tuple[bool, ...]:
    return tuple(bool(x > t) for x, t in zip(r, profile.thresholds))


@dataclass(frozen=True, order=True)
class CoreRiskMode:
    density: str
    failures: tuple[str, ...]
    layout: str
    noise: str | None = None

    def label(self) -> str:
        parts = [f"DENSITY:{self.density}"]
        parts += [f"FAILURE:{f}" for f in self.failures]
        parts.append(f"LAYOUT:{self.layout}")
        if self.noise is not None:
            parts.append(f"NOISE:{self.noise}")
        return " | ".join(parts)

    @classmethod
    def parse(cls, label: str) -> "CoreRiskMode":
        density, layout, noise = None, None, None
        failures = []
        for part in label.split("|"):
            key, _, value = part.strip().partition(":")
            if key == "DENSITY":
                density = value
            elif key == "FAILURE":
                failures.append(value)
            elif key == "LAYOUT":
                layout = value
            elif key == "NOISE":
                noise = value
            else:
                raise ValueError(f"bad mode predicate {part!r}")
        if density is None or layout is None:
            raise ValueError(f"mode label needs DENSITY and LAYOUT: {label!r}")
        return cls(density, tuple(sorted(failures)), layout, noise)

    def flatten(self) -> "CoreRiskMode":
        return CoreRiskMode(self.density, tuple(sorted(set(self.failures))), self.layout, self.noise)


def density_regime(d: float) -> str:
    if d < 1 / 3:
        return "LOW"
    if d < 2 / 3:
        return "MEDIUM"
    return "HIGH"


def core_risk_mode(
    features: Mapping[str, int],
    sig: Sequence[bool],
    schema: FeatureSchema,
    profile: LandscapeProfile,
    latents: Mapping[str, float] | None = None,
) -> CoreRiskMode:
    lat = latents if latents is not None else derive_latents(features, schema)
    noise = NOISE_REGIMES[min(features.get("NOISE_LEVEL", 0), len(NOISE_REGIMES) - 1)]
    layout = LAYOUTS[min(features.get("LAYOUT_SPLIT", 0), len(LAYOUTS) - 1)]
    failures = tuple(sorted(n for n, on in zip(profile.component_names, sig) if on))
    return CoreRiskMode(density_regime(lat["d"]), failures, layout, noise)


@dataclass
class Evaluation:
    z: np.ndarray
    features: dict
    r: tuple
    base_risk: float
    rarity: float
    risk: float
    signature: tuple
    core_mode: CoreRiskMode
    render_seed: int
    iteration: int = -1
    solver: str = ""
    seed: int = 0
    cached: bool = False

    def to_record(self) -> dict:
        return {
            "iter": self.iteration,
            "solver": self.solver,
            "seed": self.seed,
            "bits": bits_to_str(self.z),
            "features": self.features,
            "r": list(self.r),
            "base_risk": self.base_risk,
            "rarity": self.rarity,
            "risk": self.risk,
            "signature": bits_to_str(self.signature),
            "core_mode": self.core_mode.label(),
            "render_seed": self.render_seed,
            "cached": self.cached,
        }


@dataclass
class Oracle:
    """Bundles schema, profile and reference stats behind a single evaluate call."""

    schema: FeatureSchema
    profile: LandscapeProfile
    stats: ReferenceStats = field(default=None)

    def __post_init__(self):
        if self.stats is None:
            self.stats = uniform_stats(self.schema)

    def evaluate(self, z, render_seed: int) -> Evaluation:
        return evaluate(z, render_seed, self.schema, self.profile, self.stats)


def evaluate(z, render_seed: int, schema, profile, stats) -> Evaluation:
    z = np.asarray(z, dtype=np.uint8)
    feats = decode(z, schema)
    lat = derive_latents(feats, schema)
    r = component_errors(lat, profile, z, render_seed)
    rar = rarity(feats, stats)
    base, risk = aggregate_risk(r, rar, profile)
    sig = signature(r, profile)
    mode = core_risk_mode(feats, sig, schema, profile, lat)
    return Evaluation(
        z=z,
        features=feats,
        r=tuple(float(x) for x in r),
        base_risk=base,
        rarity=rar,
        risk=risk,
        signature=sig,
        core_mode=mode,
        render_seed=int(render_seed),
    )
