"""Synthetic longitudinal cohort calibrated to published baseline statistics.

Each subject carries four latent composite trajectories. Stable subjects
drift slowly; progressive subjects decline linearly and drop further in the
12 months before conversion. Imaging volumes and cognitive test scores are
noisy linear read-outs of the current composites through loading matrices
fixed by the seed, so the recurrent branches see the signal the composites
carry while clinical features are nearly uninformative.

The output is a raw cohort (groups unset, a few visits after conversion,
some diagnoses missing); run :func:`hmtl.cohort.labels.select_cohort` on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hmtl.cohort.schema import (
    COMORBIDITY_COLUMNS,
    MAX_MONTH,
    MONTH_STEP,
    N_COGNITION,
    N_COMPOSITES,
    N_IMAGING,
    VITAL_COLUMNS,
)
from hmtl.cohort.types import Cohort, Subject, Visit
from hmtl.errors import ConfigurationError

# baseline composite means / STDs per group (memory, executive, language, visual-spatial)
TABLE1_COMPOSITES = {
    "pMCI": ((-0.98, -1.1, -1.01, -0.76), (0.68, 0.85, 1.1, 1.07)),
    "sMCI": ((0.52, 0.53, 0.48, 0.07), (0.81, 0.76, 0.82, 0.74)),
}

DEFAULT_VITALS = {
    "height": (168.0, 10.0),
    "weight": (76.0, 14.0),
    "sbp": (135.0, 17.0),
    "dbp": (75.0, 10.0),
    "pulse": (66.0, 10.0),
    "temperature": (36.5, 0.4),
}

DEFAULT_COMORBIDITY = (0.55, 0.2, 0.06, 0.3, 0.35, 0.15, 0.3, 0.02, 0.05, 0.4)

# probability of converting at month 6, 12, ..., 60
DEFAULT_PROGRESSION_WEIGHTS = (0.14, 0.14, 0.13, 0.12, 0.11, 0.09, 0.08, 0.07, 0.06, 0.06)


@dataclass
class SynthConfig:
    n_subjects: int = 634
    pmci_fraction: float = 209 / 634
    composite_means: dict = field(
        default_factory=lambda: {g: v[0] for g, v in TABLE1_COMPOSITES.items()}
    )
    composite_stds: dict = field(
        default_factory=lambda: {g: v[1] for g, v in TABLE1_COMPOSITES.items()}
    )
    pmci_slope: tuple = (-0.08, -0.07, -0.06, -0.05)
    smci_slope: tuple = (-0.01, -0.01, -0.01, -0.01)
    conversion_drop: tuple = (1.2, 1.0, 0.8, 0.6)
    visit_noise: float = 0.15
    progression_weights: tuple = DEFAULT_PROGRESSION_WEIGHTS
    smci_min_followup: int = 12
    age: dict = field(default_factory=lambda: {"pMCI": (73.7, 6.5), "sMCI": (72.5, 7.0)})
    male_fraction: dict = field(default_factory=lambda: {"pMCI": 115 / 209, "sMCI": 252 / 425})
    vitals: dict = field(default_factory=lambda: dict(DEFAULT_VITALS))
    comorbidity_prevalence: tuple = DEFAULT_COMORBIDITY
    icv_mean: float = 1.5e6
    icv_std: float = 1.4e5
    imaging_missing: float = 0.2
    cognition_missing: float = 0.1
    composite_missing: float = 0.1
    diagnosis_missing: float = 0.1
    feature_missing: float = 0.02
    max_post_progression_visits: int = 2
    seed: int = 0

    def validate(self) -> None:
        if self.n_subjects < 0:
            raise ConfigurationError("n_subjects must be non-negative")
        if not 0.0 <= self.pmci_fraction <= 1.0:
            raise ConfigurationError(f"pmci_fraction must be in [0, 1], got {self.pmci_fraction}")
        for name in (
            "imaging_missing",
            "cognition_missing",
            "composite_missing",
            "diagnosis_missing",
            "feature_missing",
        ):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1), got {rate}")
        stds = [s for g in self.composite_stds.values() for s in g]
        stds += [sd for _, sd in self.age.values()] + [sd for _, sd in self.vitals.values()]
        stds += [self.icv_std, self.visit_noise]
        if any(s <= 0 for s in stds):
            raise ConfigurationError("all standard deviations must be positive")
        w = np.asarray(self.progression_weights, dtype=float)
        if len(w) != MAX_MONTH // MONTH_STEP or np.any(w < 0) or w.sum() <= 0:
            raise ConfigurationError("progression_weights needs 10 non-negative weights (months 6..60)")
        if not MONTH_STEP <= self.smci_min_followup <= MAX_MONTH:
            raise ConfigurationError("smci_min_followup must lie in [6, 60]")


@dataclass
class _Loadings:
    roi_base: np.ndarray  # (90,) volume fraction of ICV
    roi_load: np.ndarray  # (90, 4)
    cog_mean: np.ndarray  # (13,)
    cog_sd: np.ndarray  # (13,)
    cog_load: np.ndarray  # (13, 4)


def _loadings(rng: np.random.Generator) -> _Loadings:
    roi_base = rng.uniform(8e-4, 6e-3, N_IMAGING)
    roi_load = np.abs(rng.normal(0.0, 1.0, (N_IMAGING, N_COMPOSITES)))
    roi_load /= roi_load.sum(axis=1, keepdims=True)
    cog_mean = rng.uniform(5.0, 50.0, N_COGNITION)
    cog_sd = cog_mean * rng.uniform(0.1, 0.3, N_COGNITION)
    cog_load = rng.normal(0.0, 1.0, (N_COGNITION, N_COMPOSITES))
    cog_load /= np.linalg.norm(cog_load, axis=1, keepdims=True)
    return _Loadings(roi_base, roi_load, cog_mean, cog_sd, cog_load)


def _clinical(cfg: SynthConfig, group: str, rng: np.random.Generator) -> tuple[dict, float]:
    age_mu, age_sd = cfg.age[group]
    male = rng.random() < cfg.male_fraction[group]
    clinical = {"age": float(rng.normal(age_mu, age_sd)), "sex": "M" if male else "F"}
    for col in VITAL_COLUMNS:
        mu, sd = cfg.vitals[col]
        clinical[col] = float(rng.normal(mu, sd))
    for col, prev in zip(COMORBIDITY_COLUMNS, cfg.comorbidity_prevalence):
        clinical[col] = 1.0 if rng.random() < prev else 0.0
    icv = float(rng.normal(cfg.icv_mean + (0.6 if male else -0.6) * cfg.icv_std, cfg.icv_std))
    return clinical, max(icv, 0.5 * cfg.icv_mean)


def _trajectory(cfg, group, months, conversion, z0, rng) -> np.ndarray:
    months = np.asarray(months, dtype=float)
    steps = months / MONTH_STEP
    if group == "pMCI":
        ramp = np.clip(1.0 - (conversion - months) / 12.0, 0.0, 1.0)
        ramp0 = np.clip(1.0 - conversion / 12.0, 0.0, 1.0)
        drift = np.outer(steps, cfg.pmci_slope) - np.outer(ramp - ramp0, cfg.conversion_drop)
    else:
        drift = np.outer(steps, cfg.smci_slope)
    z = z0[None, :] + drift
    noise = rng.normal(0.0, cfg.visit_noise, z.shape)
    noise[months == 0] = 0.0
    return z + noise


def generate_synthetic_cohort(cfg: SynthConfig) -> Cohort:
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    load_seq, subj_seq = root.spawn(2)
    loads = _loadings(np.random.default_rng(load_seq))
    rng = np.random.default_rng(subj_seq)

    n = cfg.n_subjects
    n_pmci = int(round(n * cfg.pmci_fraction))
    groups = np.array(["pMCI"] * n_pmci + ["sMCI"] * (n - n_pmci))
    groups = groups[rng.permutation(n)] if n else groups
    weights = np.asarray(cfg.progression_weights, dtype=float)
    weights = weights / weights.sum()
    conv_months = np.arange(MONTH_STEP, MAX_MONTH + 1, MONTH_STEP)
    followups = np.arange(cfg.smci_min_followup, MAX_MONTH + 1, MONTH_STEP)

    subjects = []
    for k in range(n):
        group = str(groups[k])
        clinical, icv = _clinical(cfg, group, rng)
        mu = np.asarray(cfg.composite_means[group], dtype=float)
        sd = np.asarray(cfg.composite_stds[group], dtype=float)
        z0 = rng.normal(mu, sd)
        if group == "pMCI":
            conversion = int(rng.choice(conv_months, p=weights))
            extra = int(rng.integers(0, cfg.max_post_progression_visits + 1))
            last = conversion + MONTH_STEP * extra
        else:
            conversion = None
            last = int(rng.choice(followups))
        months = list(range(0, last + 1, MONTH_STEP))
        traj = _trajectory(cfg, group, months, conversion, z0, rng)
        roi_offset = rng.normal(0.0, 0.05, N_IMAGING)
        cog_offset = rng.normal(0.0, 0.3, N_COGNITION)
        visits = []
        for t, month in enumerate(months):
            z = traj[t]
            frac = loads.roi_base * (1.0 + roi_offset + 0.06 * (loads.roi_load @ z))
            frac = frac * (1.0 + rng.normal(0.0, 0.02, N_IMAGING))
            imaging = np.maximum(frac, 1e-5) * icv
            cognition = loads.cog_mean + loads.cog_sd * (
                loads.cog_load @ z + cog_offset + rng.normal(0.0, 0.35, N_COGNITION)
            )
            composites = z.copy()
            if conversion is not None and month >= conversion:
                diagnosis = "AD"
            else:
                diagnosis = "MCI"
            if month > 0:
                if rng.random() < cfg.imaging_missing:
                    imaging[:] = np.nan
                if rng.random() < cfg.cognition_missing:
                    cognition[:] = np.nan
                if rng.random() < cfg.composite_missing:
                    composites[:] = np.nan
                imaging[rng.random(N_IMAGING) < cfg.feature_missing] = np.nan
                cognition[rng.random(N_COGNITION) < cfg.feature_missing] = np.nan
                if diagnosis == "MCI" and rng.random() < cfg.diagnosis_missing:
                    diagnosis = None
            visits.append(Visit(month, diagnosis, imaging, cognition, composites))
        subjects.append(Subject(f"S{k:05d}", clinical, icv, visits))
    return Cohort(subjects)
