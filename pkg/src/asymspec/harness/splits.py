"""Train/validation/test node splits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigError


@dataclass(frozen=True)
class FractionalPolicy:
    p_train: float = 0.025
    p_val: float = 0.025

    def describe(self) -> dict:
        return {"kind": "fractional", "p_train": self.p_train, "p_val": self.p_val}


@dataclass(frozen=True)
class PerClassPolicy:
    n_per_class: int = 20
    n_val: int = 500
    n_test: int = 1000

    def describe(self) -> dict:
        return {"kind": "per_class", "n_per_class": self.n_per_class, "n_val": self.n_val, "n_test": self.n_test}


def policy_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", "fractional")
    try:
        if kind == "fractional":
            return FractionalPolicy(**d)
        if kind == "per_class":
            return PerClassPolicy(**d)
    except TypeError as exc:
        raise ConfigError(f"bad split policy fields: {exc}") from exc
    raise ConfigError(f"unknown split policy {kind!r}")


@dataclass(frozen=True, eq=False)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int
    policy: object = field(default=None)


def _ceil(x: float) -> int:
    # guard against 0.025 * 200 = 5.000000000000001
    return math.ceil(round(x, 9))


def make_splits(n: int, labels, policy, seed: int) -> SplitMasks:
    """Seeded split of ``n`` nodes.

    Fractional: shuffle, then ``ceil(p_train n)`` train, ``ceil(p_val n)``
    validation, the rest test. Per-class: the first ``n_per_class`` shuffled
    nodes of each class train; validation and test come from the remaining
    shuffled pool in order.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    if isinstance(policy, FractionalPolicy):
        if not (0 < policy.p_train and 0 <= policy.p_val and policy.p_train + policy.p_val < 1):
            raise ConfigError(f"infeasible fractions {policy.p_train}, {policy.p_val}")
        n_tr, n_va = _ceil(policy.p_train * n), _ceil(policy.p_val * n)
        if n_tr + n_va >= n:
            raise ConfigError(f"split leaves no test nodes for n={n}")
        return SplitMasks(
            np.sort(perm[:n_tr]), np.sort(perm[n_tr : n_tr + n_va]), np.sort(perm[n_tr + n_va :]), seed, policy
        )
    if isinstance(policy, PerClassPolicy):
        shuffled = labels[perm]
        train = []
        for c in np.unique(labels):
            members = perm[shuffled == c]
            if len(members) < policy.n_per_class:
                raise ConfigError(
                    f"class {int(c)} has {len(members)} nodes, fewer than n_per_class={policy.n_per_class}"
                )
            train.append(members[: policy.n_per_class])
        train = np.concatenate(train)
        pool = perm[~np.isin(perm, train)]
        if len(pool) < policy.n_val + policy.n_test:
            raise ConfigError(
                f"only {len(pool)} nodes remain for {policy.n_val} validation + {policy.n_test} test"
            )
        val = pool[: policy.n_val]
        test = pool[policy.n_val : policy.n_val + policy.n_test]
        return SplitMasks(np.sort(train), np.sort(val), np.sort(test), seed, policy)
    raise ConfigError(f"unknown split policy {policy!r}")
