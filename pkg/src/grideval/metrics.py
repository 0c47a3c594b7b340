"""Metric kernels and trajectory expectations for image grids.

Position-based (rbp) and cascade-based (err) scoring of a viewing
trajectory, relevance from exemplar cosine similarity, novelty
discounting against previously inspected images, Plackett-Luce
trajectory sampling via Gumbel perturbation, and the Monte-Carlo and
exact-enumeration expectations over trajectories.
"""

from __future__ import annotations

import hashlib
from itertools import permutations

import numpy as np

from .errors import CapabilityError, ConfigError, IngestionError, InvalidInputError
from .types import Embedding, GridCase, MetricConfig, MetricResult, Trajectory

SAMPLE_CHUNK = 65536
EXACT_MAX_K = 8


def _vec(x) -> np.ndarray:
    if isinstance(x, Embedding):
        return x.vector
    return np.asarray(x, dtype=np.float64)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two embeddings, clipped to [-1, 1].

    Value-equal vectors return exactly 1.0, so exact duplicates are
    recognized downstream (novelty discount exactly 0) with no float
    slop from normalization.
    """
    va, vb = _vec(a), _vec(b)
    if va.shape != vb.shape:
        raise IngestionError(
            f"embedding dimension mismatch: {va.shape} vs {vb.shape}"
        )
    if np.array_equal(va, vb):
        return 1.0
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise InvalidInputError("cosine similarity undefined for zero vectors")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def relevance(image, targets, agg: str = "max") -> float:
    """Relevance of an image to a prompt's target exemplars.

    Aggregates per-target cosine similarity with max (closest exemplar)
    or mean, then clamps to [0, 1].
    """
    targets = list(targets)
    if not targets:
        raise InvalidInputError("relevance requires at least one target")
    if agg not in ("max", "mean"):
        raise ConfigError(f"agg must be 'max' or 'mean', got {agg!r}")
    sims = [cosine_similarity(image, t) for t in targets]
    value = max(sims) if agg == "max" else float(np.mean(sims))
    return float(min(1.0, max(0.0, value)))


def relevance_vector(case: GridCase, agg: str = "max") -> np.ndarray:
    """Per-image relevance for a grid, index-aligned with case.images."""
    return np.array(
        [relevance(img.embedding, case.targets, agg) for img in case.images]
    )


def pairwise_similarity_matrix(embeddings) -> np.ndarray:
    """All-pairs cosine similarity, (k, k) symmetric.

    Accepts a sequence of embeddings or a (k, d) array. The diagonal is
    pinned to 1.0 and value-equal rows are pinned to similarity 1.0,
    matching cosine_similarity's duplicate handling.
    """
    if isinstance(embeddings, np.ndarray):
        mat = np.asarray(embeddings, dtype=np.float64)
    else:
        mat = np.stack([_vec(e) for e in embeddings])
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise InvalidInputError("expected a non-empty (k, d) embedding array")
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise InvalidInputError("zero-norm embedding in similarity matrix")
    unit = mat / norms
    sim = unit @ unit.T
    np.clip(sim, -1.0, 1.0, out=sim)
    np.fill_diagonal(sim, 1.0)
    groups = {}
    for idx in range(mat.shape[0]):
        groups.setdefault(mat[idx].tobytes(), []).append(idx)
    for idxs in groups.values():
        if len(idxs) > 1:
            block = np.array(idxs)
            sim[np.ix_(block, block)] = 1.0
    return sim


def _check_gamma(gamma) -> float:
    g = float(gamma)
    if not (0.0 < g <= 1.0):
        raise ConfigError(f"gamma must be in (0, 1], got {gamma!r}")
    return g


def _check_unit_interval(values, what: str, err=InvalidInputError) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size:
        if not np.all(np.isfinite(arr)):
            raise err(f"{what} values must be finite")
        if float(np.min(arr)) < 0.0 or float(np.max(arr)) > 1.0:
            raise err(f"{what} values must lie in [0, 1]")
    return arr


def _order_array(traj, k: int) -> np.ndarray:
    if not isinstance(traj, Trajectory):
        traj = Trajectory(tuple(traj))
    order = np.asarray(traj.order, dtype=np.intp)
    if order.size != k:
        raise InvalidInputError(
            f"trajectory length {order.size} does not match {k} items"
        )
    return order


def _gpow(gamma: float, k: int) -> np.ndarray:
    return gamma ** np.arange(k)


def _cascade_sum(gains, sat, gpow):
    # survival[i] = prod_{j < i} (1 - sat_j); empty product is 1
    stop = np.cumprod(1.0 - sat)
    survival = np.concatenate(([1.0], stop[:-1]))
    return np.sum(gains * gpow * survival)


def rbp(traj, rel, gamma: float = 0.9) -> float:
    """Position-based score of one trajectory.

    The simulated user inspects the image at rank i with probability
    gamma^(i-1), so the score is sum_i rel[traj_i] * gamma^(i-1).
    """
    gamma = _check_gamma(gamma)
    rel = _check_unit_interval(rel, "relevance")
    order = _order_array(traj, rel.size)
    return float(np.sum(rel[order] * _gpow(gamma, order.size)))


def err(traj, rel, satiation_values, gamma: float = 0.9) -> float:
    """Cascade score of one trajectory.

    After inspecting the image at rank j the user stops with probability
    satiation_values[traj_j], so rank i contributes
    rel[traj_i] * gamma^(i-1) * prod_{j<i} (1 - satiation_values[traj_j]).
    With satiation identically zero this equals rbp bitwise.
    """
    gamma = _check_gamma(gamma)
    rel = _check_unit_interval(rel, "relevance")
    sat = _check_unit_interval(satiation_values, "satiation", err=ConfigError)
    if sat.shape != rel.shape:
        raise InvalidInputError("relevance and satiation lengths differ")
    order = _order_array(traj, rel.size)
    return float(_cascade_sum(rel[order], sat[order], _gpow(gamma, order.size)))


def novelty_discount(i: int, traj, embeddings) -> float:
    """Novelty of the i-th inspected image (1-indexed).

    One minus the maximum cosine similarity between the image at rank i
    and the images inspected before it, clamped to [0, 1]. The first
    position is maximally novel (the empty max counts as 0).
    """
    embs = list(embeddings)
    order = _order_array(traj, len(embs))
    i = int(i)
    if not (1 <= i <= order.size):
        raise InvalidInputError(f"position {i} outside 1..{order.size}")
    if i == 1:
        return 1.0
    current = embs[order[i - 1]]
    prior = max(
        cosine_similarity(current, embs[order[j]]) for j in range(i - 1)
    )
    return float(min(1.0, max(0.0, 1.0 - prior)))


def _check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidInputError("weights must be a non-empty 1-D vector")
    if not np.all(np.isfinite(w)):
        raise IngestionError("weights must be finite")
    if np.any(w < 0.0):
        raise IngestionError("weights must be nonnegative")
    if not np.any(w > 0.0):
        raise InvalidInputError("at least one weight must be positive")
    return w / np.sum(w)


def _sample_orders(weights, n: int, rng) -> np.ndarray:
    # Gumbel top-k: argsort of perturbed log-weights draws Plackett-Luce
    # exactly. log(0) = -inf keeps zero-weight items behind every
    # positive one; the stable sort breaks their ties by ascending index.
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    keys = logw + rng.gumbel(size=(n, weights.size))
    return np.argsort(-keys, axis=1, kind="stable")


def sample_trajectory(weights, rng) -> Trajectory:
    """Draw one Plackett-Luce trajectory over normalized weights."""
    return Trajectory(tuple(_sample_orders(_check_weights(weights), 1, rng)[0]))


def sample_trajectories(weights, n: int, rng) -> np.ndarray:
    """Draw n Plackett-Luce trajectories as an (n, k) index array."""
    if int(n) < 1:
        raise InvalidInputError(f"sample count must be >= 1, got {n!r}")
    return _sample_orders(_check_weights(weights), int(n), rng)


def case_rng(seed: int, prompt_id: str) -> np.random.Generator:
    """Per-case generator seeded from the run seed xor a stable 64-bit
    digest of the prompt id, so scheduling order cannot perturb draws."""
    digest = hashlib.blake2b(prompt_id.encode("utf-8"), digest_size=8).digest()
    mixed = (int(seed) ^ int.from_bytes(digest, "little")) & (2**64 - 1)
    return np.random.default_rng(mixed)


def _case_arrays(case: GridCase, config: MetricConfig):
    rel = relevance_vector(case, config.relevance_agg)
    sim = None
    if config.novelty:
        sim = pairwise_similarity_matrix(case.embedding_matrix())
    return rel, sim


def _dist_weights(case: GridCase, config: MetricConfig) -> np.ndarray:
    if config.trajectory_dist == "uniform":
        return np.full(case.size, 1.0 / case.size)
    weights = case.saliency_vector()
    if not np.any(weights > 0.0):
        raise InvalidInputError(
            f"grid {case.prompt_id!r} has no positive saliency but a "
            "saliency-weighted trajectory distribution was requested"
        )
    return weights / np.sum(weights)


def _score_orders(orders, rel, sim, config, gpow) -> np.ndarray:
    """Score a batch of trajectories, one row per (n, k) order row."""
    gains = rel[orders]
    if config.novelty:
        nov = np.ones_like(gains)
        for i in range(1, orders.shape[1]):
            prior = sim[orders[:, i, None], orders[:, :i]]
            nov[:, i] = 1.0 - prior.max(axis=1)
        np.clip(nov, 0.0, 1.0, out=nov)
        gains = gains * nov
    terms = gains * gpow
    if config.user_model == "cascade":
        sat = _check_unit_interval(
            config.satiation_fn()(gains), "satiation", err=ConfigError
        )
        stop = np.cumprod(1.0 - sat, axis=1)
        survival = np.concatenate(
            [np.ones((orders.shape[0], 1)), stop[:, :-1]], axis=1
        )
        terms = terms * survival
    return terms.sum(axis=1)


def _score_one(order, rel, sim, config, gpow) -> float:
    """Scalar scoring route used by the enumeration path."""
    gains = rel[order].astype(np.float64, copy=True)
    if config.novelty:
        for i in range(1, order.size):
            prior = float(sim[order[i], order[:i]].max())
            gains[i] *= min(1.0, max(0.0, 1.0 - prior))
    if config.user_model == "position":
        return float(np.sum(gains * gpow))
    sat = _check_unit_interval(
        config.satiation_fn()(gains), "satiation", err=ConfigError
    )
    return float(_cascade_sum(gains, sat, gpow))


def _result(case, config, value, used, sem=0.0) -> MetricResult:
    return MetricResult(
        prompt_id=case.prompt_id,
        metric_name=config.metric_name,
        value=float(value),
        num_trajectories_used=int(used),
        seed=int(config.seed),
        std_error=float(sem),
    )


def expected_metric(case: GridCase, config: MetricConfig) -> MetricResult:
    """Estimate one metric variant for one grid.

    reading_order scores the deterministic row-major trajectory. The
    sampled distributions draw config.num_trajectories viewing orders
    from the per-case generator and average the per-trajectory scores.
    When every draw yields the same score that score is returned as-is,
    so degenerate grids (k=1, all images identical) carry no averaging
    roundoff. Bit-reproducible for fixed (case, config, seed).
    """
    rel, sim = _case_arrays(case, config)
    gpow = _gpow(config.gamma, case.size)
    if config.trajectory_dist == "reading_order":
        order = np.arange(case.size, dtype=np.intp)[None, :]
        value = _score_orders(order, rel, sim, config, gpow)[0]
        return _result(case, config, value, 1)
    weights = _dist_weights(case, config)
    rng = case_rng(config.seed, case.prompt_id)
    n = int(config.num_trajectories)
    chunks = []
    remaining = n
    while remaining > 0:
        batch = min(remaining, SAMPLE_CHUNK)
        orders = _sample_orders(weights, batch, rng)
        chunks.append(_score_orders(orders, rel, sim, config, gpow))
        remaining -= batch
    scores = chunks[0] if len(chunks) == 1 else np.concatenate(chunks)
    if float(scores.min()) == float(scores.max()):
        return _result(case, config, scores[0], n)
    sem = float(scores.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return _result(case, config, scores.mean(), n, sem)


def exact_expected_metric(case: GridCase, config: MetricConfig) -> MetricResult:
    """Exact expectation over the trajectory distribution.

    Enumerates permutations of the positive-weight items, weighting each
    by its Plackett-Luce chain-rule probability; zero-weight items trail
    in ascending index order, matching the sampler's tie policy. Guarded
    at k <= 8 (40320 permutations).
    """
    k = case.size
    if k > EXACT_MAX_K:
        raise CapabilityError(
            f"exact enumeration supports k <= {EXACT_MAX_K}, got {k}"
        )
    rel, sim = _case_arrays(case, config)
    gpow = _gpow(config.gamma, k)
    if config.trajectory_dist == "reading_order":
        order = np.arange(k, dtype=np.intp)
        return _result(case, config, _score_one(order, rel, sim, config, gpow), 1)
    weights = _dist_weights(case, config)
    positive = [i for i in range(k) if weights[i] > 0.0]
    trailing = tuple(i for i in range(k) if weights[i] == 0.0)
    positive_total = float(np.sum(weights[positive]))
    probs = []
    scores = []
    for perm in permutations(positive):
        order = np.array(perm + trailing, dtype=np.intp)
        prob = 1.0
        rem = positive_total
        for e in perm:
            prob *= weights[e] / rem
            rem -= weights[e]
        probs.append(prob)
        scores.append(_score_one(order, rel, sim, config, gpow))
    scores = np.asarray(scores)
    if float(scores.min()) == float(scores.max()):
        return _result(case, config, scores[0], len(scores))
    return _result(case, config, np.dot(np.asarray(probs), scores), len(scores))
