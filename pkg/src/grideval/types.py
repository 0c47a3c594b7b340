"""Core data model: embeddings, grid cases, trajectories, metric configs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidInputError

USER_MODELS = ("position", "cascade")
TRAJECTORY_DISTS = ("saliency", "uniform", "reading_order")
RELEVANCE_AGGS = ("max", "mean")

# Canonical variant names, in report order, mapped to
# (user_model, novelty, trajectory_dist).
VARIANTS = {
    "rbp": ("position", False, "saliency"),
    "novrbp": ("position", True, "saliency"),
    "urbp": ("position", True, "uniform"),
    "err": ("cascade", False, "saliency"),
    "noverr": ("cascade", True, "saliency"),
    "uerr": ("cascade", True, "uniform"),
}


def _as_vector(values) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise InvalidInputError("embedding vector must be 1-D and non-empty")
    if not np.all(np.isfinite(vec)):
        raise InvalidInputError("embedding vector contains non-finite values")
    return vec


@dataclass(frozen=True)
class Embedding:
    """A dense feature vector with a stable identifier.

    Vectors must be finite with strictly positive Euclidean norm; zero
    vectors make cosine similarity undefined and are rejected here.
    """

    id: str
    vector: np.ndarray

    def __post_init__(self):
        vec = _as_vector(self.vector)
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)
        if not self.id:
            raise InvalidInputError("embedding id must be non-empty")
        if float(np.linalg.norm(vec)) == 0.0:
            raise InvalidInputError(f"embedding {self.id!r} has zero norm")

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass(frozen=True)
class GridImage:
    """One grid slot: the image's embedding plus its saliency mass.

    Saliency is an unnormalized nonnegative weight; normalization happens
    when the trajectory distribution over the whole grid is built.
    """

    image_id: str
    embedding: Embedding
    saliency: float = 1.0

    def __post_init__(self):
        sal = float(self.saliency)
        if not np.isfinite(sal) or sal < 0.0:
            raise InvalidInputError(
                f"saliency must be finite and >= 0, got {self.saliency!r}"
            )
        object.__setattr__(self, "saliency", sal)


@dataclass(frozen=True)
class GridCase:
    """An m-by-n grid of generated images for one prompt.

    Images are stored row-major; ``targets`` holds exemplar embeddings
    known to satisfy the prompt. All embeddings in one case share a
    dimension and image ids are unique.
    """

    prompt_id: str
    width: int
    height: int
    images: tuple
    targets: tuple

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        if not self.prompt_id:
            raise InvalidInputError("prompt_id must be non-empty")
        if self.width < 1 or self.height < 1:
            raise InvalidInputError("grid dimensions must be >= 1")
        if len(self.images) != self.width * self.height:
            raise InvalidInputError(
                f"grid {self.prompt_id!r} declares {self.width}x{self.height} "
                f"but carries {len(self.images)} images"
            )
        if not self.targets:
            raise InvalidInputError(f"grid {self.prompt_id!r} has no target exemplars")
        dims = {img.embedding.dim for img in self.images}
        dims |= {t.dim for t in self.targets}
        if len(dims) != 1:
            raise InvalidInputError(
                f"grid {self.prompt_id!r} mixes embedding dimensions {sorted(dims)}"
            )
        ids = [img.image_id for img in self.images]
        if len(set(ids)) != len(ids):
            raise InvalidInputError(f"grid {self.prompt_id!r} has duplicate image ids")

    @property
    def size(self) -> int:
        return len(self.images)

    def embedding_matrix(self) -> np.ndarray:
        """Image embeddings stacked into a (k, d) array in reading order."""
        return np.stack([img.embedding.vector for img in self.images])

    def target_matrix(self) -> np.ndarray:
        return np.stack([t.vector for t in self.targets])

    def saliency_vector(self) -> np.ndarray:
        return np.array([img.saliency for img in self.images], dtype=np.float64)


@dataclass(frozen=True)
class Trajectory:
    """A viewing order over a grid: a permutation of image indices."""

    order: tuple

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        object.__setattr__(self, "order", order)
        if sorted(order) != list(range(len(order))):
            raise InvalidInputError(
                f"trajectory {order!r} is not a permutation of 0..{len(order) - 1}"
            )

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self):
        return iter(self.order)


# Satiation maps relevance in [0, 1] to a stopping probability in [0, 1]
# and must be monotone nondecreasing. Registered by name so configs stay
# serializable; functions must accept numpy arrays elementwise.

_SATIATION_REGISTRY = {}


def register_satiation(name: str, fn) -> None:
    if not callable(fn):
        raise ConfigError(f"satiation {name!r} is not callable")
    _SATIATION_REGISTRY[str(name)] = fn


def resolve_satiation(name: str):
    try:
        return _SATIATION_REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown satiation {name!r}; registered: {sorted(_SATIATION_REGISTRY)}"
        ) from None


register_satiation("identity", lambda r: np.asarray(r, dtype=np.float64))
register_satiation("zero", lambda r: np.zeros_like(np.asarray(r, dtype=np.float64)))
register_satiation("sqrt", np.sqrt)
register_satiation("square", np.square)


@dataclass(frozen=True)
class MetricConfig:
    """Everything that pins down one metric variant and its estimator.

    gamma is the per-rank patience discount. user_model picks the
    position or cascade kernel; novelty multiplies relevance by the
    novelty discount; trajectory_dist selects how viewing orders are
    drawn (reading_order is the deterministic row-major order). seed
    plus the prompt id fully determine the sampled trajectories.
    """

    user_model: str = "position"
    novelty: bool = False
    trajectory_dist: str = "saliency"
    gamma: float = 0.9
    satiation: str = "identity"
    relevance_agg: str = "max"
    num_trajectories: int = 100
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < float(self.gamma) <= 1.0):
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma!r}")
        if self.user_model not in USER_MODELS:
            raise ConfigError(
                f"user_model must be one of {USER_MODELS}, got {self.user_model!r}"
            )
        if self.trajectory_dist not in TRAJECTORY_DISTS:
            raise ConfigError(
                f"trajectory_dist must be one of {TRAJECTORY_DISTS}, "
                f"got {self.trajectory_dist!r}"
            )
        if self.relevance_agg not in RELEVANCE_AGGS:
            raise ConfigError(
                f"relevance_agg must be one of {RELEVANCE_AGGS}, "
                f"got {self.relevance_agg!r}"
            )
        if int(self.num_trajectories) < 1:
            raise ConfigError(
                f"num_trajectories must be >= 1, got {self.num_trajectories!r}"
            )
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        resolve_satiation(self.satiation)

    @property
    def metric_name(self) -> str:
        """Canonical variant name, or a descriptive fallback.

        The six named rows cover every (user_model, novelty,
        trajectory_dist) combination the named table defines; other
        combinations get a systematic name so reports stay unambiguous.
        """
        combo = (self.user_model, self.novelty, self.trajectory_dist)
        for name, key in VARIANTS.items():
            if key == combo:
                return name
        kernel = "rbp" if self.user_model == "position" else "err"
        parts = [kernel]
        if self.novelty:
            parts.insert(0, "nov")
        parts.append(self.trajectory_dist.replace("_", "-"))
        return "-".join(parts)

    def variant(self, name: str) -> "MetricConfig":
        """This config with user_model/novelty/trajectory_dist swapped
        for the named variant's combination."""
        try:
            user_model, novelty, dist = VARIANTS[name]
        except KeyError:
            raise ConfigError(
                f"unknown metric variant {name!r}; known: {sorted(VARIANTS)}"
            ) from None
        return MetricConfig(
            user_model=user_model,
            novelty=novelty,
            trajectory_dist=dist,
            gamma=self.gamma,
            satiation=self.satiation,
            relevance_agg=self.relevance_agg,
            num_trajectories=self.num_trajectories,
            seed=self.seed,
        )

    def satiation_fn(self):
        return resolve_satiation(self.satiation)


@dataclass(frozen=True)
class MetricResult:
    """A scored variant for one grid.

    std_error is the standard error of the Monte-Carlo mean (sample
    standard deviation with ddof=1 over num_trajectories_used draws);
    it is 0.0 when the value is exact (reading_order, enumeration, or
    a single draw). It is an extension field: consumers that only need
    the point estimate can ignore it.
    """

    prompt_id: str
    metric_name: str
    value: float
    num_trajectories_used: int
    seed: int
    std_error: float = 0.0
