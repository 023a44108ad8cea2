"""Config ingestion: sectioned key-value files with strict key validation.

Keys mirror the experimental parameter table: n_pixels, pixel_size_m,
energy_keV or wavelength_m, distance_m, detector_pixels, n_angles,
photons_n0, seed under [geometry]; background, grain_a, grain_b, n_grains
under [phantom]; solver and sweep knobs under [reconstruct] and [sweep].
Unknown sections or keys are hard errors naming the offender. A manifest
JSON produced by a previous run is accepted wherever a config file is, which
reproduces that run bit-identically.
"""

from __future__ import annotations

import configparser
import json
from pathlib import Path

from .geometry import (
    Material,
    ScanGeometry,
    material_by_name,
    uniform_angles,
    wavelength_from_energy,
)


class ConfigError(ValueError):
    """Invalid configuration; maps to CLI exit code 1."""


_SCHEMA = {
    "geometry": {
        "n_pixels": int,
        "pixel_size_m": float,
        "energy_kev": float,
        "wavelength_m": float,
        "distance_m": float,
        "detector_pixels": int,
        "n_angles": int,
        "photons_n0": float,
        "seed": int,
    },
    "phantom": {
        "background": str,
        "grain_a": str,
        "grain_b": str,
        "n_grains": int,
    },
    "reconstruct": {
        "alpha_tsd": float,
        "alpha_acd": float,
        "sigma": float,
        "epsilon": float,
        "tau_tol": float,
        "max_iters": int,
    },
    "sweep": {
        "n0_list": str,
        "workers": int,
    },
}

# desk-scale defaults: minutes-scale runs, proportions of the reference scan
DESK_DEFAULTS = {
    "geometry": {
        "n_pixels": "64",
        "pixel_size_m": "1e-6",
        "energy_kev": "40",
        "distance_m": "0.5",
        "detector_pixels": "192",
        "n_angles": "120",
        "photons_n0": "1e5",
        "seed": "7",
    },
    "phantom": {
        "background": "polycarbonate",
        "grain_a": "polycarbonate",
        "grain_b": "diamond",
        "n_grains": "12",
    },
}

# reference scan: 200x200 object at 1 um, 40 keV, R = 0.5 m, 572 detector
# bins, 360 angles, 1e5 photons
FULL_SCALE_GEOMETRY = {
    "n_pixels": "200",
    "pixel_size_m": "1e-6",
    "energy_kev": "40",
    "distance_m": "0.5",
    "detector_pixels": "572",
    "n_angles": "360",
    "photons_n0": "1e5",
    "seed": "7",
}


def _coerce(section: str, key: str, raw: str):
    kind = _SCHEMA[section][key]
    try:
        return kind(raw) if kind is not str else raw.strip()
    except ValueError as e:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from e


def load_config(path=None, full_scale: bool = False) -> dict:
    """Parse a config (INI or run-manifest JSON) into {section: {key: value}}.

    Missing keys fall back to the desk-scale defaults (or the full-scale
    geometry when full_scale is set); unknown sections/keys raise ConfigError.
    """
    raw: dict[str, dict[str, str]] = {}
    if path is not None:
        text = Path(path).read_text()
        stripped = text.lstrip()
        if stripped.startswith("{"):
            manifest = json.loads(text)
            raw = {
                s: {k: str(v) for k, v in kv.items()}
                for s, kv in manifest.get("config", {}).items()
            }
        else:
            parser = configparser.ConfigParser()
            try:
                parser.read_string(text)
            except configparser.Error as e:
                raise ConfigError(f"{path}: {e}") from e
            raw = {s: dict(parser.items(s)) for s in parser.sections()}

    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in raw[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key [{section}] {key}")

    defaults = {s: dict(kv) for s, kv in DESK_DEFAULTS.items()}
    if full_scale:
        defaults["geometry"] = dict(FULL_SCALE_GEOMETRY)
        defaults["phantom"]["n_grains"] = "18"
    merged: dict[str, dict] = {}
    for section, schema in _SCHEMA.items():
        merged[section] = {}
        base = defaults.get(section, {})
        for key, raw_val in base.items():
            merged[section][key] = _coerce(section, key, raw_val)
        for key, raw_val in raw.get(section, {}).items():
            merged[section][key] = _coerce(section, key, raw_val)

    geo = merged["geometry"]
    if "energy_kev" in geo and "wavelength_m" in geo and path is not None:
        explicit = raw.get("geometry", {})
        if "energy_kev" in explicit and "wavelength_m" in explicit:
            raise ConfigError(
                "[geometry] give either energy_keV or wavelength_m, not both"
            )
        if "wavelength_m" in explicit:
            geo.pop("energy_kev", None)
    return merged


def config_to_strings(cfg: dict) -> dict:
    """Printable {section: {key: str}} form, as embedded in manifests."""
    return {s: {k: repr(v) if isinstance(v, float) else str(v) for k, v in kv.items()}
            for s, kv in cfg.items()}


def geometry_from_config(cfg: dict) -> ScanGeometry:
    geo = cfg["geometry"]
    if "wavelength_m" in geo:
        lam = geo["wavelength_m"]
    else:
        lam = wavelength_from_energy(geo["energy_kev"])
    try:
        return ScanGeometry(
            n_pixels=geo["n_pixels"],
            object_pixel_size=geo["pixel_size_m"],
            wavelength=lam,
            distance_R=geo["distance_m"],
            detector_pixel_size=geo["pixel_size_m"],
            n_detector=geo["detector_pixels"],
            angles=uniform_angles(geo["n_angles"]),
            photons_N0=geo["photons_n0"],
            rng_seed=geo["seed"],
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def phantom_materials(cfg: dict) -> tuple[Material, Material, Material]:
    ph = cfg["phantom"]
    try:
        return (
            material_by_name(ph["background"]),
            material_by_name(ph["grain_a"]),
            material_by_name(ph["grain_b"]),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def noise_levels(cfg: dict) -> list[float]:
    raw = cfg.get("sweep", {}).get("n0_list")
    if raw is None:
        return [1e3, 5e3, 1e4, 5e4]
    try:
        vals = [float(tok) for tok in raw.replace(",", " ").split()]
    except ValueError as e:
        raise ConfigError(f"[sweep] n0_list: cannot parse {raw!r}") from e
    if not vals or any(v <= 0 for v in vals):
        raise ConfigError("[sweep] n0_list must be positive values")
    return vals
