"""Synthetic study areas with planted mixture structure.

The generator draws design-level covariates directly (accessibility
z-columns standard normal, population log-normal, land-use rates from
bounded Beta distributions), samples component memberships from planted
weights, and sets ln(price) = x'beta_k plus Gaussian noise.  Cell prices are
the exponentiated responses, so the full file pipeline runs end to end on
the output; the planted design itself is returned (and written) alongside,
and is the ground truth that recovery benchmarks measure against.

All randomness flows from one seed, split per stage, so identical specs
produce identical areas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .access import KINDS, FacilityKind
from .design import DESIGN_COLUMNS, Dataset
from .errors import InvariantViolation
from .grid import FacilityPoint, GridCell, StudyArea
from .mixture import MixtureParams

_STAGE_PARAMS, _STAGE_COVARIATES, _STAGE_MEMBERSHIP, _STAGE_NOISE, _STAGE_FACILITIES = range(5)

DEFAULT_FACILITY_COUNTS: Mapping[str, int] = {
    "kindergarten": 30,
    "elementary_school": 15,
    "public_library": 5,
    "daycare": 40,
    "senior_community": 25,
    "senior_education": 8,
    "health_facility": 20,
    "neighborhood_park": 12,
    "public_park": 6,
}


def _stage_rng(seed: int, stage: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stage)]))


@dataclass(frozen=True)
class SynthSpec:
    """A complete recipe for one synthetic study area."""

    n_rows: int
    n_cols: int
    weights: tuple[float, ...]
    betas: np.ndarray
    sigmas2: tuple[float, ...]
    seed: int
    noise_scale: float = 1.0
    cell_size_m: float = 100.0
    facility_counts: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_FACILITY_COUNTS))

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise InvariantViolation("grid dimensions must be positive")
        if self.cell_size_m <= 0:
            raise InvariantViolation("cell_size_m must be positive")
        if self.noise_scale < 0:
            raise InvariantViolation("noise_scale must be >= 0")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise InvariantViolation("seed must be a nonnegative integer")
        w = tuple(float(v) for v in self.weights)
        if abs(sum(w) - 1.0) > 1e-12 or any(v <= 0 for v in w):
            raise InvariantViolation("weights must be positive and sum to 1")
        s2 = tuple(float(v) for v in self.sigmas2)
        if any(v <= 0 for v in s2):
            raise InvariantViolation("planted variances must be positive")
        betas = np.asarray(self.betas, dtype=float)
        if betas.shape != (len(w), len(DESIGN_COLUMNS)):
            raise InvariantViolation(
                f"betas must have shape ({len(w)}, {len(DESIGN_COLUMNS)})"
            )
        counts = {str(FacilityKind(k)): int(v) for k, v in self.facility_counts.items()}
        if any(v < 0 for v in counts.values()):
            raise InvariantViolation("facility counts must be >= 0")
        for kind in KINDS:
            counts.setdefault(str(kind), 0)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "sigmas2", s2)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "facility_counts", counts)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def to_payload(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "weights": list(self.weights),
            "betas": self.betas.tolist(),
            "sigmas2": list(self.sigmas2),
            "seed": self.seed,
            "noise_scale": self.noise_scale,
            "cell_size_m": self.cell_size_m,
            "facility_counts": dict(self.facility_counts),
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> "SynthSpec":
        required = {"n_rows", "n_cols", "weights", "betas", "sigmas2", "seed"}
        missing = required - set(payload)
        if missing:
            raise InvariantViolation(f"synth spec missing fields: {sorted(missing)}")
        kwargs = {k: payload[k] for k in required}
        for opt in ("noise_scale", "cell_size_m", "facility_counts"):
            if opt in payload:
                kwargs[opt] = payload[opt]
        kwargs["weights"] = tuple(kwargs["weights"])
        kwargs["sigmas2"] = tuple(kwargs["sigmas2"])
        kwargs["betas"] = np.asarray(kwargs["betas"], dtype=float)
        return cls(**kwargs)


def planted_spec(k: int, seed: int, *, n_rows: int = 8, n_cols: int = 113,
                 separation: float = 40.0, noise_scale: float = 1.0,
                 facility_counts: Mapping[str, int] | None = None) -> SynthSpec:
    """A k-component spec with controlled component separation.

    Component intercepts are spaced ``separation`` noise standard deviations
    apart; slopes share a common base with small per-component offsets, so
    regression surfaces stay parallel enough not to cross where the
    covariates live.  Weights are distinct (mildly decreasing).
    """
    if k < 1:
        raise InvariantViolation("k must be >= 1")
    if separation < 0:
        raise InvariantViolation("separation must be >= 0")
    rng = _stage_rng(seed, _STAGE_PARAMS)

    weights = np.linspace(1.5, 1.0, k)
    weights /= weights.sum()

    sigmas = rng.uniform(0.02, 0.03, size=k)
    gap = separation * float(sigmas.max())

    def signed(lo, hi):
        return rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi)

    base = np.empty(len(DESIGN_COLUMNS))
    base[0] = rng.uniform(14.0, 18.0)
    for j in range(1, 10):
        base[j] = 0.0 if rng.random() < 0.15 else signed(0.4, 1.0)
    base[10] = rng.uniform(0.3, 0.5)      # ln_population
    base[11] = signed(3.0, 5.0)           # female_rate
    base[12] = signed(1.2, 2.0)           # public_land_rate
    base[13] = signed(2.5, 3.5)           # commercial_rate
    base[14] = signed(2.5, 3.5)           # green_rate

    betas = np.tile(base, (k, 1))
    offsets = rng.normal(0.0, 0.05, size=(k, len(DESIGN_COLUMNS)))
    offsets[:, 0] = 0.0
    zero_base = base == 0.0
    offsets[:, zero_base] = 0.0
    betas += offsets
    betas[:, 0] = base[0] + gap * (np.arange(k) - (k - 1) / 2.0)

    return SynthSpec(
        n_rows=n_rows,
        n_cols=n_cols,
        weights=tuple(weights),
        betas=betas,
        sigmas2=tuple(float(s) ** 2 for s in sigmas),
        seed=seed,
        noise_scale=noise_scale,
        facility_counts=dict(facility_counts or DEFAULT_FACILITY_COUNTS),
    )


@dataclass(frozen=True)
class PlantedTruth:
    """What the generator planted: parameters, memberships, and the seed."""

    params: MixtureParams
    labels: np.ndarray
    cell_ids: tuple[str, ...]
    seed: int
    noise_scale: float


@dataclass(frozen=True)
class SynthResult:
    area: StudyArea
    data: Dataset
    truth: PlantedTruth


def generate(spec: SynthSpec) -> SynthResult:
    """Generate the study area, the planted design, and the planted truth."""
    n = spec.n_cells
    k = spec.k

    rng_cov = _stage_rng(spec.seed, _STAGE_COVARIATES)
    z = rng_cov.standard_normal((n, len(KINDS)))
    ln_pop_draw = rng_cov.normal(5.5, 1.1, size=n)
    population = np.maximum(1, np.rint(np.exp(ln_pop_draw))).astype(int)
    female = rng_cov.beta(20.0, 20.0, size=n)
    public = rng_cov.beta(0.84, 2.05, size=n)
    green = rng_cov.beta(0.1, 4.0, size=n)
    commercial = rng_cov.beta(0.08, 2.0, size=n)

    X = np.empty((n, len(DESIGN_COLUMNS)))
    X[:, 0] = 1.0
    X[:, 1:10] = z
    X[:, 10] = np.log(population)
    X[:, 11] = female
    X[:, 12] = public
    X[:, 13] = commercial
    X[:, 14] = green

    rng_member = _stage_rng(spec.seed, _STAGE_MEMBERSHIP)
    labels = rng_member.choice(k, size=n, p=np.asarray(spec.weights))

    rng_noise = _stage_rng(spec.seed, _STAGE_NOISE)
    means = X @ spec.betas.T
    sds = np.sqrt(np.asarray(spec.sigmas2))
    y = means[np.arange(n), labels] + spec.noise_scale * sds[labels] * rng_noise.standard_normal(n)

    size = spec.cell_size_m
    cells = []
    for i in range(n):
        r, c = divmod(i, spec.n_cols)
        cells.append(
            GridCell(
                id=f"c{i + 1:05d}",
                centroid_x=(c + 0.5) * size,
                centroid_y=(r + 0.5) * size,
                population=float(population[i]),
                female_rate=float(female[i]),
                public_land_rate=float(public[i]),
                green_rate=float(green[i]),
                commercial_rate=float(commercial[i]),
                land_price=float(np.exp(y[i])),
            )
        )

    rng_fac = _stage_rng(spec.seed, _STAGE_FACILITIES)
    width = spec.n_cols * size
    height = spec.n_rows * size
    facilities = []
    for kind in KINDS:
        count = spec.facility_counts[str(kind)]
        xs = rng_fac.uniform(0.0, width, size=count)
        ys = rng_fac.uniform(0.0, height, size=count)
        facilities.extend(FacilityPoint(kind, float(a), float(b)) for a, b in zip(xs, ys))

    cell_ids = tuple(c.id for c in cells)
    area = StudyArea(tuple(cells), tuple(facilities), cell_size_m=size)
    data = Dataset(y, X, DESIGN_COLUMNS, cell_ids)
    params = MixtureParams(np.asarray(spec.weights), spec.betas, np.asarray(spec.sigmas2))
    truth = PlantedTruth(params, labels, cell_ids, spec.seed, spec.noise_scale)
    return SynthResult(area, data, truth)


def truth_payload(truth: PlantedTruth, columns=DESIGN_COLUMNS) -> dict:
    """JSON-ready dict of the planted truth."""
    return {
        "k": truth.params.k,
        "columns": list(columns),
        "weights": truth.params.weights.tolist(),
        "betas": truth.params.betas.tolist(),
        "sigmas2": truth.params.sigmas2.tolist(),
        "noise_scale": truth.noise_scale,
        "seed": truth.seed,
        "labels": {cid: int(lab) for cid, lab in zip(truth.cell_ids, truth.labels)},
    }
