"""Seeded synthetic firm-year panels driven by the task-assignment model.

Each firm-year draws a digital capability ``theta`` (trend + firm effect +
city-year shock + AR(1) innovation). Hiring shares are the model's labor
shares at that ``theta`` plus Gaussian noise projected back onto the
simplex; posting counts split a random volume by those shares, and task
scores are computed from the counts. Everything the generator used is
written to a manifest so the panel can be regenerated exactly.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from .assignment import demand_over_thetas
from .metrics import TASKS, TaskWeights, task_score
from .model import (
    ConfigError,
    DigitalCapitalSpec,
    EconomyConfig,
    Mode,
    Occupation,
    OccupationSpec,
)

GENERATOR = "numpy.random.Generator(PCG64)"
START_YEAR = 2016
CONTROLS = ("size", "roa", "cashflow", "ato", "board", "tobinq", "fixed")


def default_economy() -> EconomyConfig:
    """Five linear-productivity occupations; digital capital borders the
    physical occupation in task space, so rising theta erodes physical
    hiring first and raises every other share."""
    O = Occupation
    occs = (
        OccupationSpec(O.AUX, 1.3, 0.0, 0.3, 1.0),
        OccupationSpec(O.MGMT, 1.25, 0.0, 0.75, 1.0),
        OccupationSpec(O.TECH, 1.15, 0.0, 1.15, 1.0),
        OccupationSpec(O.PROF, 1.0, 0.0, 1.5, 1.0),
        OccupationSpec(O.PHYS, 0.325, 0.0, 2.325, 1.0),
    )
    return EconomyConfig(occs, DigitalCapitalSpec(kappa_bar=1.0, theta=5.0, gamma=2.0, rental=2.0))


@dataclass(frozen=True)
class SynthConfig:
    n_firms: int = 400
    n_years: int = 5
    n_cities: int = 40
    n_industries: int = 10
    n_provinces: int = 8
    theta_base: float = 5.0
    theta_trend: float = 0.1
    theta_firm_sd: float = 0.3
    theta_city_sd: float = 0.2
    theta_persistence: float = 0.5
    theta_innovation_sd: float = 0.2
    digital_offset: float = 0.0
    digital_scale: float = 0.7
    # when set, digital_scale is chosen so d(share_prof)/d(digital) equals this at theta_base
    target_prof_slope: float | None = None
    volume_log_mean: float = 5.0
    volume_log_sd: float = 1.0
    volume_digital_slope: float = 0.2
    share_noise_sd: float = 0.01
    endogeneity_sd: float = 0.0
    endogeneity_loading: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_firms", "n_years", "n_cities", "n_industries", "n_provinces"):
            if getattr(self, name) < 1:
                raise ConfigError(f"synth.{name} must be a positive integer")
        for name in ("theta_firm_sd", "theta_city_sd", "theta_innovation_sd", "volume_log_sd",
                     "share_noise_sd", "endogeneity_sd"):
            if getattr(self, name) < 0:
                raise ConfigError(f"synth.{name} must be nonnegative")
        if not 0.0 <= self.theta_persistence < 1.0:
            raise ConfigError("synth.theta_persistence must lie in [0, 1)")
        if self.digital_scale <= 0:
            raise ConfigError("synth.digital_scale must be positive")


def _shares(econ: EconomyConfig, thetas: np.ndarray) -> np.ndarray:
    """Labor hiring shares, columns in canonical occupation order."""
    mass = demand_over_thetas(econ, thetas)[:, :-1]
    labor = mass.sum(axis=1)
    if np.any(labor <= 0):
        bad = float(thetas[np.argmax(labor <= 0)])
        raise ConfigError(f"every task goes to digital capital at theta={bad:.12g}; shares undefined")
    return mass / labor[:, None]


def share_slopes(econ: EconomyConfig, theta: float, step: float = 1e-4) -> dict[Occupation, float]:
    """Central finite difference of each hiring share in theta."""
    s = _shares(econ, np.array([theta - step, theta + step]))
    return {k: float((s[1, j] - s[0, j]) / (2 * step)) for j, k in enumerate(econ.kinds)}


def resolve_digital_scale(cfg: SynthConfig, econ: EconomyConfig) -> float:
    if cfg.target_prof_slope is None:
        return cfg.digital_scale
    if Occupation.PROF not in econ.kinds:
        raise ConfigError("target_prof_slope needs a prof occupation in the economy")
    slope = share_slopes(econ, cfg.theta_base)[Occupation.PROF]
    if slope == 0 or (slope > 0) != (cfg.target_prof_slope > 0):
        raise ConfigError(f"prof share slope {slope:.6g} at theta_base cannot hit the target sign")
    return slope / cfg.target_prof_slope


def _split_counts(volume: np.ndarray, shares: np.ndarray) -> np.ndarray:
    """Largest-remainder apportionment of each volume by its share row."""
    raw = volume[:, None] * shares
    counts = np.floor(raw).astype(np.int64)
    short = volume - counts.sum(axis=1)
    order = np.argsort(-(raw - counts), axis=1, kind="stable")
    for i in np.flatnonzero(short > 0):
        counts[i, order[i, : short[i]]] += 1
    return counts


def generate_panel(cfg: SynthConfig, econ: EconomyConfig | None = None,
                   weights: TaskWeights | None = None) -> tuple[pd.DataFrame, dict]:
    """Return ``(panel frame, manifest dict)``."""
    econ = econ or default_economy()
    weights = weights or TaskWeights.default()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    F, T = cfg.n_firms, cfg.n_years
    scale = resolve_digital_scale(cfg, econ)

    city = rng.integers(0, cfg.n_cities, size=F)
    industry = rng.integers(0, cfg.n_industries, size=F)
    province = city % cfg.n_provinces
    firm_effect = rng.normal(0.0, cfg.theta_firm_sd, size=F)
    city_shock = rng.normal(0.0, cfg.theta_city_sd, size=(cfg.n_cities, T))

    rho = cfg.theta_persistence
    innov = np.empty((F, T))
    innov[:, 0] = rng.normal(0.0, cfg.theta_innovation_sd / math.sqrt(1.0 - rho * rho), size=F)
    for t in range(1, T):
        innov[:, t] = rho * innov[:, t - 1] + rng.normal(0.0, cfg.theta_innovation_sd, size=F)

    t_idx = np.tile(np.arange(T), F)
    f_idx = np.repeat(np.arange(F), T)
    theta = (cfg.theta_base + cfg.theta_trend * t_idx + firm_effect[f_idx]
             + city_shock[city[f_idx], t_idx] + innov.ravel())
    theta = np.maximum(theta, 0.0)
    n = F * T

    endog = rng.normal(0.0, cfg.endogeneity_sd, size=n) if cfg.endogeneity_sd > 0 else np.zeros(n)
    digital = cfg.digital_offset + scale * theta + endog

    model_shares = _shares(econ, theta)
    noise = rng.normal(0.0, cfg.share_noise_sd, size=model_shares.shape) if cfg.share_noise_sd > 0 \
        else np.zeros_like(model_shares)
    if Occupation.PROF in econ.kinds:
        noise[:, econ.kinds.index(Occupation.PROF)] += cfg.endogeneity_loading * endog
    shares = np.clip(model_shares + noise, 0.0, None)
    sums = shares.sum(axis=1)
    shares = np.where(sums[:, None] > 0, shares / np.where(sums > 0, sums, 1.0)[:, None], model_shares)

    log_volume = (cfg.volume_log_mean + cfg.volume_digital_slope * digital
                  + rng.normal(0.0, cfg.volume_log_sd, size=n))
    volume = np.maximum(1, np.rint(np.exp(log_volume))).astype(np.int64)
    counts = _split_counts(volume, shares)

    controls = {
        "size": rng.normal(22.26, 1.24, size=n),
        "roa": rng.normal(0.04, 0.06, size=n),
        "cashflow": rng.normal(0.049, 0.06, size=n),
        "ato": rng.lognormal(-0.63, 0.55, size=n),
        "board": rng.normal(2.1, 0.18, size=n),
        "tobinq": 0.74 + rng.lognormal(0.0, 0.7, size=n),
        "fixed": rng.beta(2.0, 5.0, size=n),
    }

    frame = pd.DataFrame({
        "firm": f_idx + 1,
        "year": START_YEAR + t_idx,
        "city": city[f_idx] + 1,
        "industry": industry[f_idx] + 1,
        "province": province[f_idx] + 1,
        "theta": theta,
        "digital": digital,
    })
    for j, k in enumerate(econ.kinds):
        frame[f"share_{k.label}"] = shares[:, j]
    frame["total_hire"] = volume
    for j, k in enumerate(econ.kinds):
        frame[f"count_{k.label}"] = counts[:, j]
    per_task = {task: weights.for_task(task) for task in TASKS}
    for task in ("abstract", "routine", "manual"):
        w = per_task[task]
        frame[task] = [task_score(w, dict(zip(econ.kinds, row))) for row in counts.tolist()]
    frame["hhi"] = np.einsum("ij,ij->i", shares, shares)
    for name, values in controls.items():
        frame[name] = values

    ref_theta = float(theta.mean())
    manifest = {
        "generator": GENERATOR,
        "seed": cfg.seed,
        "synth": dataclasses.asdict(cfg),
        "economy": economy_to_dict(econ),
        "digital_scale": scale,
        "rows": n,
        "theta_mean": ref_theta,
        "planted_share_slopes": {
            k.label: v / scale for k, v in share_slopes(econ, ref_theta).items()
        },
        "planted_share_slopes_at_theta_base": {
            k.label: v / scale for k, v in share_slopes(econ, cfg.theta_base).items()
        },
        "planted_task_slopes": planted_task_slopes(econ, weights, ref_theta, scale,
                                                   cfg.volume_digital_slope),
        "volume_digital_slope": cfg.volume_digital_slope,
    }
    return frame, manifest


def planted_task_slopes(econ: EconomyConfig, weights: TaskWeights, theta: float, scale: float,
                        volume_slope: float) -> dict[str, float | None]:
    """Local slope of each task score on the digital index.

    A score is ``log1p(V * sum_k w_k s_k)`` with ``log V`` linear in the
    index, so away from tiny counts its slope is the volume slope plus the
    semi-elasticity of the weighted share. ``None`` when no occupation
    loads on the task.
    """
    s = _shares(econ, np.array([theta]))[0]
    ds = share_slopes(econ, theta)
    out: dict[str, float | None] = {}
    for task in TASKS:
        w = weights.for_task(task)
        level = sum(w.get(k, 0.0) * s[j] for j, k in enumerate(econ.kinds))
        if level <= 0:
            out[task] = None
            continue
        d = sum(w.get(k, 0.0) * ds[k] for k in econ.kinds)
        out[task] = volume_slope + d / level / scale
    return out


def economy_to_dict(econ: EconomyConfig) -> dict[str, Any]:
    return {
        "composition_mode": econ.composition_mode.value,
        "occupations": [
            {"kind": o.kind.label, "lambda_m": o.lambda_m, "lambda_r": o.lambda_r,
             "lambda_a": o.lambda_a, "wage": o.wage}
            for o in econ.occupations
        ],
        "digital": dataclasses.asdict(econ.digital),
    }


def economy_from_dict(d: dict[str, Any]) -> EconomyConfig:
    occs = tuple(
        OccupationSpec(Occupation.from_label(o["kind"]), float(o["lambda_m"]), float(o["lambda_r"]),
                       float(o["lambda_a"]), float(o["wage"]))
        for o in d["occupations"]
    )
    dg = d["digital"]
    digital = DigitalCapitalSpec(float(dg["kappa_bar"]), float(dg.get("theta", 0.0)),
                                 float(dg["gamma"]), float(dg["rental"]))
    return EconomyConfig(occs, digital, Mode(d.get("composition_mode", "raw")))


def regenerate(manifest: dict) -> tuple[pd.DataFrame, dict]:
    """Rebuild a panel from its manifest."""
    cfg = SynthConfig(**manifest["synth"])
    return generate_panel(cfg, economy_from_dict(manifest["economy"]))


def manifest_json(manifest: dict) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"
