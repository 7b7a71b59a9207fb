"""Trajectory types, predicate/action codecs, normalization, and the episodic dataset format.

Observations are plain float vectors (agent position, block poses as
x, y, sin/cos of heading, door-open fraction, button flag), optionally
stacked over a short history by the policies; no wrapper class is used.

The on-disk dataset format is a directory holding ``meta.json`` plus raw
little-endian float32 arrays in row-major order::

    <dir>/meta.json          version, d_o, d_a, J, n_steps, predicate_names,
                             episode_starts, skill_labels, seed, extra
    <dir>/observations.f32   n_steps x d_o
    <dir>/actions.f32        n_steps x d_a
    <dir>/predicates.f32     n_steps x J, entries in {0, 1}

``skill_labels`` is stored run-length encoded as ``[[start_index, label], ...]``
over the concatenated step axis (or null when absent).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericsError, ValidationError

DATASET_VERSION = 1

_ARRAY_FILES = ("observations", "actions", "predicates")


@dataclass
class ActionTrajectory:
    """Horizon-length sequence of control actions, one row per step."""

    values: np.ndarray  # (H, d_a)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValidationError(f"action trajectory must be H x d_a, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise NumericsError("action trajectory contains non-finite entries")

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def action_dim(self) -> int:
        return self.values.shape[1]


@dataclass
class PredicateBeliefTrajectory:
    """Per-step soft truth values in [0, 1], one column per predicate."""

    beliefs: np.ndarray  # (H, J)
    predicate_names: list[str]

    def __post_init__(self):
        self.beliefs = np.asarray(self.beliefs, dtype=np.float64)
        if self.beliefs.ndim != 2:
            raise ValidationError(f"beliefs must be H x J, got {self.beliefs.shape}")
        if self.beliefs.shape[1] != len(self.predicate_names):
            raise ValidationError(
                f"{self.beliefs.shape[1]} belief columns vs {len(self.predicate_names)} predicate names"
            )
        if np.any(self.beliefs < 0.0) or np.any(self.beliefs > 1.0):
            raise ValidationError("beliefs must lie in [0, 1]")

    @property
    def horizon(self) -> int:
        return self.beliefs.shape[0]


@dataclass
class JointTrajectory:
    """Generated H x (d_a + J) matrix; action columns first, predicate channels after.

    Values are in model (normalized) space. Use :func:`decode_beliefs` on
    ``belief_columns`` and a :class:`Normalizer` on ``action_columns`` to
    recover executable quantities.
    """

    y: np.ndarray  # (H, d_a + J)
    action_dim: int

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.ndim != 2:
            raise ValidationError(f"joint trajectory must be 2-D, got shape {self.y.shape}")
        if not 0 <= self.action_dim <= self.y.shape[1]:
            raise ValidationError(
                f"action_dim {self.action_dim} out of range for width {self.y.shape[1]}"
            )

    @property
    def horizon(self) -> int:
        return self.y.shape[0]

    @property
    def n_predicates(self) -> int:
        return self.y.shape[1] - self.action_dim

    @property
    def action_columns(self) -> np.ndarray:
        return self.y[:, : self.action_dim]

    @property
    def belief_columns(self) -> np.ndarray:
        return self.y[:, self.action_dim:]


def encode_predicates(labels: np.ndarray) -> np.ndarray:
    """Map binary predicate labels {0, 1} to the generative range [-1, 1]."""
    labels = np.asarray(labels, dtype=np.float64)
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise ValidationError("predicate labels must be binary 0/1")
    return 2.0 * labels - 1.0


def decode_beliefs(generated: np.ndarray) -> np.ndarray:
    """Map generated predicate channels back to beliefs in [0, 1].

    Generated values may fall outside [-1, 1]; they are clamped only here,
    at decode time.
    """
    generated = np.asarray(generated, dtype=np.float64)
    if np.any(np.isnan(generated)):
        raise NumericsError("generated predicate channels contain NaN")
    return np.clip((generated + 1.0) / 2.0, 0.0, 1.0)


def threshold_beliefs(z_row: np.ndarray, theta: float = 0.5) -> np.ndarray:
    """Discretize one belief row with a strict ``> theta`` test."""
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"threshold must lie in [0, 1], got {theta}")
    z_row = np.asarray(z_row, dtype=np.float64)
    if np.any(z_row < 0.0) or np.any(z_row > 1.0):
        raise ValidationError("belief values must lie in [0, 1]")
    return (z_row > theta).astype(np.int64)


@dataclass
class Normalizer:
    """Per-dimension affine map between data ranges and [-1, 1].

    Degenerate (constant) dimensions are widened by ``eps`` on the upper
    side, so a constant value maps to -1.
    """

    obs_min: np.ndarray
    obs_max: np.ndarray
    action_min: np.ndarray
    action_max: np.ndarray
    eps: float = 1e-6

    KINDS = ("obs", "action")

    def _bounds(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        if kind == "obs":
            return self.obs_min, self.obs_max
        if kind == "action":
            return self.action_min, self.action_max
        raise ValidationError(f"unknown normalizer kind {kind!r}")

    def normalize(self, x: np.ndarray, kind: str) -> np.ndarray:
        lo, hi = self._bounds(kind)
        x = np.asarray(x, dtype=np.float64)
        return 2.0 * (x - lo) / (hi - lo) - 1.0

    def denormalize(self, x: np.ndarray, kind: str) -> np.ndarray:
        lo, hi = self._bounds(kind)
        x = np.asarray(x, dtype=np.float64)
        return (x + 1.0) / 2.0 * (hi - lo) + lo

    def to_dict(self) -> dict:
        return {
            "obs_min": self.obs_min.tolist(),
            "obs_max": self.obs_max.tolist(),
            "action_min": self.action_min.tolist(),
            "action_max": self.action_max.tolist(),
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(
            obs_min=np.asarray(d["obs_min"], dtype=np.float64),
            obs_max=np.asarray(d["obs_max"], dtype=np.float64),
            action_min=np.asarray(d["action_min"], dtype=np.float64),
            action_max=np.asarray(d["action_max"], dtype=np.float64),
            eps=float(d.get("eps", 1e-6)),
        )


def fit_normalizer(dataset: "EpisodeDataset", eps: float = 1e-6) -> Normalizer:
    """Fit per-dimension min/max stats over a dataset's observations and actions."""
    if dataset.n_steps == 0:
        raise ValidationError("cannot fit a normalizer on an empty dataset")

    def _minmax(arr):
        lo = arr.min(axis=0).astype(np.float64)
        hi = arr.max(axis=0).astype(np.float64)
        hi = np.where(hi - lo < eps, lo + eps, hi)
        return lo, hi

    obs_min, obs_max = _minmax(dataset.observations)
    act_min, act_max = _minmax(dataset.actions)
    return Normalizer(obs_min, obs_max, act_min, act_max, eps=eps)


@dataclass
class EpisodeDataset:
    """Per-step observations, actions and binary predicate labels with episode boundaries."""

    observations: np.ndarray  # (N, d_o) float32
    actions: np.ndarray  # (N, d_a) float32
    predicates: np.ndarray  # (N, J) float32 in {0, 1}
    episode_starts: np.ndarray  # sorted int64, first entry 0
    predicate_names: list[str]
    skill_labels: list[str] | None = None  # length N when present
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.observations = np.ascontiguousarray(self.observations, dtype=np.float32)
        self.actions = np.ascontiguousarray(self.actions, dtype=np.float32)
        self.predicates = np.ascontiguousarray(self.predicates, dtype=np.float32)
        self.episode_starts = np.asarray(self.episode_starts, dtype=np.int64)
        self.validate()

    def validate(self):
        n = self.observations.shape[0]
        if self.actions.shape[0] != n or self.predicates.shape[0] != n:
            raise ValidationError("observations/actions/predicates row counts differ")
        if self.predicates.shape[1] != len(self.predicate_names):
            raise ValidationError(
                f"{self.predicates.shape[1]} predicate columns vs "
                f"{len(self.predicate_names)} predicate names"
            )
        if not np.all((self.predicates == 0.0) | (self.predicates == 1.0)):
            raise ValidationError("predicate labels must be binary 0/1")
        if n > 0:
            if self.episode_starts.size == 0 or self.episode_starts[0] != 0:
                raise ValidationError("episode_starts must begin with 0")
            if np.any(np.diff(self.episode_starts) <= 0):
                raise ValidationError("episode_starts must be strictly increasing")
            if self.episode_starts[-1] >= n:
                raise ValidationError("episode start beyond dataset length")
        if self.skill_labels is not None and len(self.skill_labels) != n:
            raise ValidationError("skill_labels length must match step count")

    @property
    def n_steps(self) -> int:
        return self.observations.shape[0]

    @property
    def n_episodes(self) -> int:
        return len(self.episode_starts)

    @property
    def d_o(self) -> int:
        return self.observations.shape[1]

    @property
    def d_a(self) -> int:
        return self.actions.shape[1]

    @property
    def n_predicates(self) -> int:
        return self.predicates.shape[1]

    def episode_bounds(self) -> list[tuple[int, int]]:
        """Half-open [start, end) index ranges, one per episode."""
        starts = self.episode_starts.tolist()
        ends = starts[1:] + [self.n_steps]
        return list(zip(starts, ends))


def _labels_to_runs(labels: list[str]) -> list[list]:
    runs = []
    for i, lab in enumerate(labels):
        if not runs or runs[-1][1] != lab:
            runs.append([i, lab])
    return runs


def _runs_to_labels(runs: list[list], n: int) -> list[str]:
    labels = [""] * n
    for idx, (start, lab) in enumerate(runs):
        end = runs[idx + 1][0] if idx + 1 < len(runs) else n
        if not 0 <= start < n or end > n:
            raise FormatError("skill label run index out of range")
        for i in range(start, end):
            labels[i] = lab
    return labels


def save_dataset(dataset: EpisodeDataset, path: str | Path) -> None:
    """Write a dataset directory (meta.json + raw float32 arrays)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": DATASET_VERSION,
        "d_o": dataset.d_o,
        "d_a": dataset.d_a,
        "J": dataset.n_predicates,
        "n_steps": dataset.n_steps,
        "predicate_names": list(dataset.predicate_names),
        "episode_starts": dataset.episode_starts.tolist(),
        "skill_labels": None
        if dataset.skill_labels is None
        else _labels_to_runs(dataset.skill_labels),
        "seed": dataset.metadata.get("seed"),
        "extra": {k: v for k, v in dataset.metadata.items() if k != "seed"},
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2))
    arrays = {
        "observations": dataset.observations,
        "actions": dataset.actions,
        "predicates": dataset.predicates,
    }
    for name, arr in arrays.items():
        (path / f"{name}.f32").write_bytes(
            np.ascontiguousarray(arr, dtype="<f4").tobytes()
        )


def load_dataset(path: str | Path) -> EpisodeDataset:
    """Read a dataset directory written by :func:`save_dataset`."""
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        raise FormatError(f"missing meta.json under {path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"corrupt meta.json under {path}: {exc}") from exc
    if meta.get("version") != DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {meta.get('version')!r}")

    n = int(meta["n_steps"])
    dims = {"observations": int(meta["d_o"]), "actions": int(meta["d_a"]), "predicates": int(meta["J"])}
    arrays = {}
    for name in _ARRAY_FILES:
        f = path / f"{name}.f32"
        if not f.is_file():
            raise FormatError(f"missing array file {f.name}")
        raw = f.read_bytes()
        expected = n * dims[name] * 4
        if len(raw) != expected:
            raise FormatError(
                f"{f.name} holds {len(raw)} bytes, expected {expected} "
                f"for {n} x {dims[name]} float32"
            )
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(n, dims[name]).copy()

    if len(meta["predicate_names"]) != dims["predicates"]:
        raise FormatError("predicate_names length disagrees with J")

    skill_labels = meta.get("skill_labels")
    if skill_labels is not None:
        skill_labels = _runs_to_labels(skill_labels, n)

    metadata = dict(meta.get("extra") or {})
    if meta.get("seed") is not None:
        metadata["seed"] = meta["seed"]
    try:
        return EpisodeDataset(
            observations=arrays["observations"],
            actions=arrays["actions"],
            predicates=arrays["predicates"],
            episode_starts=np.asarray(meta["episode_starts"], dtype=np.int64),
            predicate_names=list(meta["predicate_names"]),
            skill_labels=skill_labels,
            metadata=metadata,
        )
    except ValidationError as exc:
        raise FormatError(f"dataset under {path} is inconsistent: {exc}") from exc


def concatenate_datasets(parts: list[EpisodeDataset]) -> EpisodeDataset:
    """Join datasets episode-wise; predicate names and dims must agree."""
    if not parts:
        raise ValidationError("need at least one dataset to concatenate")
    names = parts[0].predicate_names
    for p in parts[1:]:
        if p.predicate_names != names:
            raise ValidationError("predicate_names differ across datasets")
        if p.d_o != parts[0].d_o or p.d_a != parts[0].d_a:
            raise ValidationError("dimension mismatch across datasets")
    starts = []
    offset = 0
    labels: list[str] | None = [] if all(p.skill_labels is not None for p in parts) else None
    for p in parts:
        starts.append(p.episode_starts + offset)
        offset += p.n_steps
        if labels is not None:
            labels.extend(p.skill_labels)  # type: ignore[arg-type]
    return EpisodeDataset(
        observations=np.concatenate([p.observations for p in parts]),
        actions=np.concatenate([p.actions for p in parts]),
        predicates=np.concatenate([p.predicates for p in parts]),
        episode_starts=np.concatenate(starts),
        predicate_names=list(names),
        skill_labels=labels,
        metadata=dict(parts[0].metadata),
    )
