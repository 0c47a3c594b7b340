"""Shared fixtures and independent reference implementations.

The reference functions below are deliberately written as plain Python
loops over the defining formulas, with their own cosine and
Plackett-Luce probability code, so tests compare the library against a
second route rather than against itself.
"""

import math
from itertools import permutations
from pathlib import Path

import numpy as np
import pytest

import grideval as ge

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def ref_cosine(a, b):
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return dot / (na * nb)


def ref_rbp(order, rel, gamma):
    return sum(rel[j] * gamma**i for i, j in enumerate(order))


def ref_err(order, rel, sat, gamma):
    total = 0.0
    alive = 1.0
    for i, j in enumerate(order):
        total += rel[j] * gamma**i * alive
        alive *= 1.0 - sat[j]
    return total


def ref_trajectory_score(order, rel, embs, user_model, novelty, gamma,
                         satiation=lambda r: r):
    """One trajectory's score straight from the definitions."""
    gains = []
    for i, j in enumerate(order):
        g = float(rel[j])
        if novelty and i > 0:
            sims = []
            for t in range(i):
                if np.array_equal(np.asarray(embs[j]), np.asarray(embs[order[t]])):
                    sims.append(1.0)
                else:
                    sims.append(min(1.0, max(-1.0, ref_cosine(embs[j], embs[order[t]]))))
            g *= min(1.0, max(0.0, 1.0 - max(sims)))
        gains.append(g)
    total = 0.0
    alive = 1.0
    for i, g in enumerate(gains):
        if user_model == "position":
            total += g * gamma**i
        else:
            total += g * gamma**i * alive
            alive *= 1.0 - float(satiation(g))
    return total


def ref_pl_probability(order, weights):
    """Chain-rule probability of one permutation under Plackett-Luce."""
    prob = 1.0
    remaining = list(range(len(weights)))
    for j in order:
        denom = sum(weights[t] for t in remaining)
        prob *= weights[j] / denom
        remaining.remove(j)
    return prob


def ref_expected(rel, embs, weights, user_model, novelty, gamma,
                 satiation=lambda r: r):
    """Brute-force expectation over all permutations.

    Zero-weight items are pinned behind the positive ones in ascending
    order, mirroring the documented tie policy.
    """
    k = len(weights)
    positive = [i for i in range(k) if weights[i] > 0]
    trailing = tuple(i for i in range(k) if weights[i] == 0)
    total = 0.0
    for perm in permutations(positive):
        order = perm + trailing
        prob = ref_pl_probability(perm, [weights[i] for i in range(k)])
        total += prob * ref_trajectory_score(
            order, rel, embs, user_model, novelty, gamma, satiation
        )
    return total


def make_case(rng, k=4, d=8, prompt_id="case", n_targets=2,
              duplicate=False, zero_saliency=False, saliency=None):
    """Random grid case with positive saliency by default."""
    vecs = [rng.normal(size=d) for _ in range(k)]
    if duplicate and k >= 2:
        vecs[1] = vecs[0].copy()
    if saliency is None:
        saliency = np.abs(rng.normal(size=k)) + 0.05
        if zero_saliency:
            saliency[-1] = 0.0
    images = tuple(
        ge.GridImage(
            image_id=f"{prompt_id}-img{i}",
            embedding=ge.Embedding(id=f"{prompt_id}-e{i}", vector=vecs[i]),
            saliency=float(saliency[i]),
        )
        for i in range(k)
    )
    targets = tuple(
        ge.Embedding(id=f"{prompt_id}-t{j}", vector=rng.normal(size=d))
        for j in range(n_targets)
    )
    return ge.GridCase(
        prompt_id=prompt_id, width=k, height=1, images=images, targets=targets
    )
