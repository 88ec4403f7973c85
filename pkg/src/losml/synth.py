"""Synthetic SPARCS-shaped discharge tables with planted length-of-stay effects.

Length of stay is drawn as ``ceil(exp(z))`` capped at 120, with

    z = base + severity_effect * (severity - 1) + age_effect * age_index
          + emergency_effect * is_emergency + noise * N(0, 1)

so the marginal distribution is right-skewed and mean stay rises with
severity and age. Costs scale as ``los ** cost_coupling``; with every effect
and the coupling at zero the target is independent of all features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import SPARCS_COLUMNS, Dataset

AGE_GROUPS = ("0 to 17", "18 to 29", "30 to 49", "50 to 69", "70 or Older")
SEVERITY = ("Minor", "Moderate", "Major", "Extreme")

_VOCAB: dict[str, tuple[tuple[str, ...], tuple[float, ...]]] = {
    "Health Service Area": (
        ("New York City", "Long Island", "Hudson Valley", "Capital/Adirond",
         "Central NY", "Finger Lakes", "Western NY", "Southern Tier"),
        (0.42, 0.14, 0.1, 0.07, 0.08, 0.08, 0.08, 0.03),
    ),
    "Age Group": (AGE_GROUPS, (0.12, 0.1, 0.2, 0.29, 0.29)),
    "Gender": (("F", "M", "U"), (0.54, 0.459, 0.001)),
    "Race": (
        ("White", "Black/African American", "Other Race", "Multi-racial"),
        (0.55, 0.18, 0.24, 0.03),
    ),
    "Type of Admission": (
        ("Emergency", "Elective", "Urgent", "Newborn", "Trauma"),
        (0.64, 0.17, 0.09, 0.09, 0.01),
    ),
    "Patient Disposition": (
        ("Home or Self Care", "Home w/ Home Health Services", "Skilled Nursing Home",
         "Left Against Medical Advice", "Expired", "Short-term Hospital"),
        (0.63, 0.16, 0.11, 0.03, 0.03, 0.04),
    ),
    "APR Medical Surgical Description": (("Medical", "Surgical", "Not Applicable"), (0.74, 0.25, 0.01)),
    "Payment Typology 1": (
        ("Medicare", "Medicaid", "Private Health Insurance", "Blue Cross/Blue Shield", "Self-Pay"),
        (0.38, 0.3, 0.17, 0.12, 0.03),
    ),
}

SEVERITY_PROBS = (0.36, 0.38, 0.2, 0.06)


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int = 5000
    seed: int = 0
    base_log_los: float = 0.75
    severity_effect: float = 0.55
    age_effect: float = 0.1
    emergency_effect: float = 0.15
    noise: float = 0.45
    cost_coupling: float = 0.5
    cost_noise: float = 0.6
    missing_rate: float = 0.0
    vocabularies: dict = field(default_factory=lambda: dict(_VOCAB), compare=False)

    def __post_init__(self):
        if self.n_rows < 100:
            raise SynthError("n_rows must be at least 100")
        effects = (
            self.base_log_los, self.severity_effect, self.age_effect,
            self.emergency_effect, self.noise, self.cost_coupling, self.cost_noise,
        )
        if not all(math.isfinite(e) for e in effects):
            raise SynthError("effect sizes must be finite")
        if self.noise < 0 or self.cost_noise < 0:
            raise SynthError("noise levels must be non-negative")
        if not 0.0 <= self.missing_rate < 0.5:
            raise SynthError("missing_rate must lie in [0, 0.5)")

    def without_effects(self) -> "SynthSpec":
        return replace(self, severity_effect=0.0, age_effect=0.0, emergency_effect=0.0, cost_coupling=0.0)


def _choice(rng, vocab, n):
    labels, probs = vocab
    p = np.asarray(probs, dtype=float)
    idx = rng.choice(len(labels), size=n, p=p / p.sum())
    return idx, np.array(labels, dtype=object)[idx]


def synthesize_dataset(spec: SynthSpec = SynthSpec()) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows
    vocab = spec.vocabularies
    cols: dict[str, np.ndarray] = {}

    for name in ("Health Service Area", "Gender", "Race", "Patient Disposition",
                 "APR Medical Surgical Description", "Payment Typology 1"):
        cols[name] = _choice(rng, vocab[name], n)[1]
    age_idx, cols["Age Group"] = _choice(rng, vocab["Age Group"], n)
    adm_idx, cols["Type of Admission"] = _choice(rng, vocab["Type of Admission"], n)
    emergency = adm_idx == 0

    sev_idx = rng.choice(4, size=n, p=np.array(SEVERITY_PROBS))
    risk_idx = np.clip(sev_idx + rng.choice([-1, 0, 0, 1], size=n), 0, 3)
    cols["APR Severity of Illness Code"] = (sev_idx + 1).astype(float)
    cols["APR Severity of Illness Description"] = np.array(SEVERITY, dtype=object)[sev_idx]
    cols["APR Risk of Mortality"] = np.array(SEVERITY, dtype=object)[risk_idx]
    cols["Emergency Department Indicator"] = np.where(emergency, "Y", "N").astype(object)

    cols["Facility Id"] = rng.integers(1, 1500, size=n).astype(float)
    cols["Zip Code - 3 digits"] = np.array([f"{z:03d}" for z in rng.integers(100, 150, size=n)], dtype=object)
    cols["CCS Diagnosis Code"] = rng.integers(1, 260, size=n).astype(float)
    cols["CCS Procedure Code"] = rng.integers(0, 232, size=n).astype(float)
    cols["APR DRG Code"] = rng.integers(1, 957, size=n).astype(float)
    cols["APR MDC Code"] = rng.integers(0, 26, size=n).astype(float)
    payers = vocab["Payment Typology 1"][0]
    cols["Payment Typology 2"] = np.array(payers, dtype=object)[rng.integers(0, len(payers), size=n)]
    cols["Payment Typology 3"] = np.array(payers, dtype=object)[rng.integers(0, len(payers), size=n)]
    cols["Attending Provider License Number"] = np.array(
        [str(v) for v in rng.integers(100000, 300000, size=n)], dtype=object
    )
    cols["License Number"] = np.array([str(v) for v in rng.integers(100000, 300000, size=n)], dtype=object)

    z = (
        spec.base_log_los
        + spec.severity_effect * sev_idx
        + spec.age_effect * age_idx
        + spec.emergency_effect * emergency
        + spec.noise * rng.standard_normal(n)
    )
    los = np.clip(np.ceil(np.exp(z)), 1, 120)
    daily = np.exp(7.6 + spec.cost_noise * rng.standard_normal(n))
    costs = np.round(daily * los ** spec.cost_coupling, 2)
    markup = np.exp(0.9 + 0.3 * rng.standard_normal(n))
    cols["Total Costs"] = costs
    cols["Total Charges"] = np.round(costs * markup, 2)
    cols["Length of Stay"] = los.astype(float)

    if spec.missing_rate > 0:
        for name in ("Gender", "Race", "Total Costs", "Length of Stay", "APR Risk of Mortality"):
            miss = rng.random(n) < spec.missing_rate
            if cols[name].dtype == object:
                cols[name][miss] = None
            else:
                cols[name][miss] = np.nan

    columns = {name: cols[name] for name, _ in SPARCS_COLUMNS}
    kinds = dict(SPARCS_COLUMNS)
    return Dataset(columns, kinds)
