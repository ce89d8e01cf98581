"""Forward model and least-squares inversion of Stern-Gerlach statistics.

A (possibly mixed) spin state is a rest-frame Bloch vector ``r``. A
Stern-Gerlach setting ``(v, b)`` acting on a particle of momentum ``p``
measures ``d.sigma`` in the particle rest frame, where ``d`` is the pullback
of the measurement direction through the standard boost. The mean outcome is
``r.d``; three settings with independent ``d`` fix ``r``, but only if ``p`` is
known.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lorentz
from .errors import DomainError, UnderdeterminedError
from .lorentz import PAULI
from .observable import SGConfig, sg_direction
from .spinor import Spinor, bloch_vector

BLOCH_TOL = 1e-12
RANK_CUTOFF = 1e-10


@dataclass(frozen=True)
class BlochState:
    """Rest-frame Bloch vector; the density operator is ``(I + r.sigma)/2``."""

    vector: np.ndarray

    def __post_init__(self):
        r = np.array(self.vector, dtype=float).reshape(3)
        if np.linalg.norm(r) > 1.0 + BLOCH_TOL:
            raise DomainError(f"|r| = {np.linalg.norm(r)} exceeds 1")
        r.setflags(write=False)
        object.__setattr__(self, "vector", r)

    @classmethod
    def from_spinor(cls, psi: Spinor) -> "BlochState":
        return cls(bloch_vector(psi))

    @property
    def purity(self) -> float:
        return float(0.5 * (1.0 + self.vector @ self.vector))

    def density_matrix(self) -> np.ndarray:
        return 0.5 * (np.eye(2) + np.einsum("i,ijk->jk", self.vector, PAULI))


def _config(v, b) -> SGConfig:
    return SGConfig(v, b, 1.0)


def effective_direction(v, b, p, m: float) -> np.ndarray:
    """Rest-frame unit 3-vector ``d`` measured by setting ``(v, b)`` on momentum ``p``."""
    n = sg_direction(_config(v, b), p, m)
    d = (lorentz.standard_boost(p, m).inverse().vector @ n)[1:]
    return d / np.linalg.norm(d)


def predict_mean(state: BlochState, v, b, p, m: float) -> float:
    """Mean Stern-Gerlach outcome ``r.d``."""
    return float(state.vector @ effective_direction(v, b, p, m))


@dataclass(frozen=True)
class MeasurementRecord:
    """One Stern-Gerlach setting and its observed mean; ``momentum`` may be unknown."""

    device_velocity: np.ndarray
    apparatus_direction: np.ndarray
    momentum: np.ndarray | None
    mean: float
    shots: int = 0

    def __post_init__(self):
        cfg = _config(self.device_velocity, self.apparatus_direction)
        object.__setattr__(self, "device_velocity", cfg.device_velocity)
        object.__setattr__(self, "apparatus_direction", cfg.field_direction)
        if self.momentum is not None:
            p = np.array(self.momentum, dtype=float).reshape(4)
            if not lorentz.is_future_timelike(p):
                raise DomainError("record momentum must be future timelike")
            p.setflags(write=False)
            object.__setattr__(self, "momentum", p)
        if not -1.0 <= self.mean <= 1.0:
            raise DomainError(f"observed mean {self.mean} outside [-1, 1]")
        if int(self.shots) != self.shots or self.shots < 0:
            raise DomainError("shots must be a non-negative integer")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "shots", int(self.shots))

    @property
    def config(self) -> SGConfig:
        return _config(self.device_velocity, self.apparatus_direction)

    def to_json(self) -> dict:
        return {
            "v": self.device_velocity.tolist(),
            "b_sg": self.apparatus_direction.tolist(),
            "p": None if self.momentum is None else self.momentum.tolist(),
            "mean": self.mean,
            "shots": self.shots,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MeasurementRecord":
        missing = {"v", "b_sg", "p", "mean", "shots"} - set(obj)
        if missing:
            raise DomainError(f"record is missing keys: {sorted(missing)}")
        return cls(obj["v"], obj["b_sg"], obj["p"], obj["mean"], obj["shots"])


def load_records(path) -> list[MeasurementRecord]:
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(MeasurementRecord.from_json(json.loads(line)))
        except (json.JSONDecodeError, DomainError, TypeError, ValueError) as exc:
            raise DomainError(f"line {lineno}: {exc}") from exc
    return records


def dump_records(records, path) -> None:
    with Path(path).open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json()) + "\n")


def simulate_records(
    state: BlochState,
    settings,
    m: float,
    shots: int = 0,
    seed: int | None = 0,
) -> list[MeasurementRecord]:
    """Forward-model one record per ``(v, b, p)`` setting.

    ``shots = 0`` gives exact means; otherwise each mean is an empirical
    average of ``shots`` outcomes in ``{+1, -1}``.
    """
    rng = np.random.default_rng(seed)
    records = []
    for v, b, p in settings:
        mean = predict_mean(state, v, b, p, m)
        if shots:
            ups = rng.binomial(shots, 0.5 * (1.0 + mean))
            mean = 2.0 * ups / shots - 1.0
        records.append(MeasurementRecord(v, b, p, float(np.clip(mean, -1.0, 1.0)), shots))
    return records


@dataclass(frozen=True)
class Reconstruction:
    """Least-squares Bloch vector with diagnostics.

    ``vector`` may leave the Bloch ball under noise; ``physical`` says
    whether it lies inside.
    """

    vector: np.ndarray
    residual: float
    rank: int
    singular_values: np.ndarray
    directions: np.ndarray

    @property
    def physical(self) -> bool:
        return bool(np.linalg.norm(self.vector) <= 1.0 + BLOCH_TOL)

    @property
    def state(self) -> BlochState:
        r = self.vector
        size = np.linalg.norm(r)
        return BlochState(r if size <= 1.0 else r / size)

    def as_dict(self) -> dict:
        return {
            "r": self.vector.tolist(),
            "residual": self.residual,
            "rank": self.rank,
            "singular_values": self.singular_values.tolist(),
            "physical": self.physical,
        }


def _solve(directions: np.ndarray, means: np.ndarray) -> Reconstruction:
    u, s, vt = np.linalg.svd(directions, full_matrices=False)
    rank = int(np.sum(s > RANK_CUTOFF))
    if rank < 3:
        raise UnderdeterminedError(rank)
    r = vt.T @ ((u.T @ means) / s)
    residual = float(np.linalg.norm(directions @ r - means))
    return Reconstruction(r, residual, rank, s, directions)


def reconstruct(records, m: float, assume_rest_frame: bool = False) -> Reconstruction:
    """Least-squares solve of ``mean_k = r.d_k``.

    With ``assume_rest_frame`` the momentum is ignored and ``d_k`` is taken to
    be the device-frame field direction, the non-relativistic recipe.
    """
    records = list(records)
    if len(records) < 3:
        raise UnderdeterminedError(min(len(records), 3) if records else 0, "need at least three records")
    rows = []
    for i, rec in enumerate(records):
        if assume_rest_frame:
            d = rec.config.device_frame_direction()
            rows.append(d / np.linalg.norm(d))
        else:
            if rec.momentum is None:
                raise DomainError(f"record {i} has unknown momentum; use momentum_sensitivity_experiment")
            rows.append(effective_direction(rec.device_velocity, rec.apparatus_direction, rec.momentum, m))
    means = np.array([rec.mean for rec in records])
    return _solve(np.array(rows), means)


@dataclass(frozen=True)
class SensitivityRow:
    apparatus_direction: np.ndarray
    rapidities: np.ndarray
    means: np.ndarray

    @property
    def spread(self) -> float:
        return float(self.means.max() - self.means.min())

    @property
    def monotone(self) -> bool:
        """Strictly monotone in rapidity (empirical, over the grid)."""
        steps = np.diff(self.means)
        return bool(len(steps) > 0 and (np.all(steps > 0) or np.all(steps < 0)))

    def as_dict(self) -> dict:
        return {
            "b_sg": self.apparatus_direction.tolist(),
            "rapidities": self.rapidities.tolist(),
            "means": self.means.tolist(),
            "spread": self.spread,
            "monotone": self.monotone,
        }


def momentum_sensitivity_experiment(
    state: BlochState,
    v,
    b_set,
    rapidities,
    boost_axis=(1.0, 0.0, 0.0),
    m: float = 1.0,
) -> list[SensitivityRow]:
    """Predicted means over a grid of particle rapidities along ``boost_axis``.

    ``v`` is the device four-velocity and ``b_set`` a list of field-direction
    four-vectors. The spread of each row is the ambiguity an unknown momentum
    introduces for that setting.
    """
    axis = np.asarray(boost_axis, dtype=float)
    if np.linalg.norm(axis) == 0.0:
        raise DomainError("boost_axis must be nonzero")
    axis = axis / np.linalg.norm(axis)
    grid = np.asarray(rapidities, dtype=float).reshape(-1)
    momenta = [m * np.concatenate([[np.cosh(y)], np.sinh(y) * axis]) for y in grid]
    rows = []
    for b in b_set:
        cfg = _config(v, b)
        means = np.array([predict_mean(state, cfg.device_velocity, cfg.field_direction, p, m) for p in momenta])
        rows.append(SensitivityRow(cfg.field_direction, grid, means))
    return rows
