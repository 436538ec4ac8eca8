"""Sources of choice for one protocol round.

Every random decision in a round goes through `Chooser.pick`, which receives
the full discrete distribution. A seeded chooser samples it; the enumeration
oracle (`twoway_qkd.engine.exact_enumerate`) walks every branch instead, so
the Monte Carlo and exact paths share one decision logic.
"""

from __future__ import annotations

import random
from typing import Callable, Iterator, Protocol, Sequence, TypeVar

T = TypeVar("T")

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


class Chooser(Protocol):
    def pick(self, weights: Sequence[float]) -> int:
        """Return the index of the chosen option; `weights` sum to 1."""
        ...


def _forced(weights: Sequence[float]) -> int | None:
    live = [i for i, w in enumerate(weights) if w > 0.0]
    if len(live) == 1:
        return live[0]
    if not live:
        raise ValueError("distribution has no positive weight")
    return None


class RandomChooser:
    """Samples choices from a seeded `random.Random` stream.

    Index i is chosen iff the uniform draw r satisfies
    sum(weights[:i]) <= r < sum(weights[:i+1]). Choices with a single
    possible outcome consume no draw.
    """

    __slots__ = ("rng",)

    def __init__(self, seed: int | random.Random) -> None:
        self.rng = seed if isinstance(seed, random.Random) else random.Random(seed)

    def reseed(self, seed: int) -> RandomChooser:
        self.rng.seed(seed)
        return self

    def pick(self, weights: Sequence[float]) -> int:
        if len(weights) == 2:
            w0, w1 = weights
            if not w1 > 0.0:
                if not w0 > 0.0:
                    raise ValueError("distribution has no positive weight")
                return 0
            if not w0 > 0.0:
                return 1
            return 0 if self.rng.random() < w0 else 1
        forced = _forced(weights)
        if forced is not None:
            return forced
        r = self.rng.random()
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if r < acc:
                return i
        # r fell in the rounding gap above the last partial sum
        return max(i for i, w in enumerate(weights) if w > 0.0)


class ScriptedChooser:
    """Replays a fixed prefix of choices, then takes the first live option.

    Every choice point reached beyond the prefix is recorded with its live
    alternatives so a caller can expand the full branch tree.
    """

    __slots__ = ("prefix", "taken", "probability", "frontier")

    def __init__(self, prefix: Sequence[int] = ()) -> None:
        self.prefix = tuple(prefix)
        self.taken: list[int] = []
        self.probability = 1.0
        # (depth, alternative index) pairs not taken on this path
        self.frontier: list[tuple[int, int]] = []

    def pick(self, weights: Sequence[float]) -> int:
        depth = len(self.taken)
        if depth < len(self.prefix):
            choice = self.prefix[depth]
            if not weights[choice] > 0.0:
                raise RuntimeError("scripted choice has zero weight; branch logic is not deterministic")
        else:
            live = [i for i, w in enumerate(weights) if w > 0.0]
            if not live:
                raise ValueError("distribution has no positive weight")
            choice = live[0]
            self.frontier.extend((depth, alt) for alt in live[1:])
        self.taken.append(choice)
        self.probability *= weights[choice]
        return choice


class BranchSpaceTooLarge(ValueError):
    def __init__(self, count: int, limit: int) -> None:
        super().__init__(f"branch space exceeds {limit} leaves (reached {count})")
        self.count = count
        self.limit = limit


def enumerate_branches(fn: Callable[[ScriptedChooser], T], max_leaves: int = 10**6) -> Iterator[tuple[T, float]]:
    """Yield (fn's result, path probability) for every live path of `fn`.

    `fn` must make its choices only through the chooser it is given. Each run
    follows one root-to-leaf path; untaken alternatives are expanded
    depth-first.
    """
    stack: list[tuple[int, ...]] = [()]
    leaves = 0
    while stack:
        chooser = ScriptedChooser(stack.pop())
        value = fn(chooser)
        leaves += 1
        if leaves > max_leaves:
            raise BranchSpaceTooLarge(leaves, max_leaves)
        yield value, chooser.probability
        path = chooser.taken
        for depth, alt in reversed(chooser.frontier):
            stack.append(tuple(path[:depth]) + (alt,))


def mix64(x: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_round_seed(master_seed: int, round_index: int) -> int:
    """Per-round 64-bit seed.

    Stable across releases: mix64(mix64(master_seed + GOLDEN) ^ round_index),
    arithmetic mod 2**64. For a fixed master seed the map is injective in
    round_index over [0, 2**64).
    """
    return mix64(mix64(master_seed + GOLDEN) ^ (round_index & MASK64))


# Stream used for post-processing draws (key-sample positions), kept apart
# from every round index a run can reach.
SAMPLING_STREAM = MASK64


def sampling_seed(master_seed: int) -> int:
    return mix64(mix64(master_seed + GOLDEN) ^ SAMPLING_STREAM ^ 0x5A5A5A5A5A5A5A5A)
