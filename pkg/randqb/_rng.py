"""Deterministic, splittable random streams.

The pipeline is fixed so that results replay exactly:
- 64-bit outputs come from xoshiro256++, whose 256-bit state is seeded by four splitmix64 outputs of the seed;
- uniform doubles are (x >> 11)·2⁻⁵³;
- normals come from Box-Muller, consuming both outputs of each pair in order.

Drawing N values at once or in pieces yields the same sequence.
"""
from __future__ import annotations

import dataclasses
import math
import typing

import annotated_types
import numpy
import numpy.typing

from . import _errors

type Seed = typing.Annotated[int, annotated_types.Interval(ge=0, lt=1 << 64)]

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int, /) -> tuple[int, int]:
    """Returns (next state, output)."""

    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


@dataclasses.dataclass(kw_only=True, eq=False)
class RngStream:
    """A single-owner random stream. Not safe for concurrent draws; fan out with `split_stream` instead."""

    origin_seed: Seed
    state: list[int]
    draws: int = 0
    spare: float | None = dataclasses.field(default=None, repr=False)

    @classmethod
    def from_seed(cls, seed: Seed, /) -> RngStream:
        if not isinstance(seed, int) or not 0 <= seed <= MASK64:
            raise _errors.InvalidArgument(f'seed must be an integer in [0, 2**64), got {seed!r}.')
        state, words = seed, []
        for _ in range(4):
            state, word = splitmix64(state)
            words.append(word)
        return cls(origin_seed=seed, state=words)

    def next_u64s(self, count: int, /) -> list[int]:
        s0, s1, s2, s3 = self.state
        out = [0] * count
        for i in range(count):
            t = (s0 + s3) & MASK64
            out[i] = ((((t << 23) | (t >> 41)) & MASK64) + s0) & MASK64
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self.state = [s0, s1, s2, s3]
        self.draws += count
        return out

    def uniform(self, count: int, /) -> numpy.typing.NDArray[numpy.float64]:
        """`count` doubles in [0, 1)."""

        words = numpy.array(self.next_u64s(count), dtype=numpy.uint64)
        return (words >> numpy.uint64(11)).astype(numpy.float64) * 2.0 ** -53

    def below(self, bound: int, /) -> int:
        """An integer uniform in [0, bound), by rejection so that no residue is favored."""

        limit = ((MASK64 + 1) // bound) * bound
        while (word := self.next_u64s(1)[0]) >= limit:
            ...
        return word % bound

    def normal(self, count: int, /) -> numpy.typing.NDArray[numpy.float64]:
        out = numpy.empty(count)
        start = 0
        if count and self.spare is not None:
            out[0], self.spare, start = self.spare, None, 1

        if pairs := (count - start + 1) // 2:
            u = self.uniform(2 * pairs)
            radius = numpy.sqrt(-2.0 * numpy.log(1.0 - u[0::2]))
            theta = 2.0 * math.pi * u[1::2]
            z = numpy.empty(2 * pairs)
            z[0::2] = radius * numpy.cos(theta)
            z[1::2] = radius * numpy.sin(theta)
            out[start:] = z[:count - start]
            if 2 * pairs > count - start:
                self.spare = float(z[-1])
        return out


def _check_count(name: str, value: int, /) -> None:
    if value < 1:
        raise _errors.InvalidArgument(f'{name} must be at least 1, got {value}.')


def gaussian_matrix(stream: RngStream, rows: int, cols: int, /) -> numpy.typing.NDArray[numpy.float64]:
    """rows×cols iid standard normals, filled column by column."""

    _check_count('rows', rows)
    _check_count('cols', cols)
    return stream.normal(rows * cols).reshape((rows, cols), order='F')


def sparse_uniform_vector(
    stream: RngStream,
    length: int,
    density: typing.Annotated[float, annotated_types.Interval(gt=0.0, le=1.0)],
    /,
) -> numpy.typing.NDArray[numpy.float64]:
    """A length×1 vector with exactly round(density·length) nonzeros in (0, 1].

    Positions come first, from a partial Fisher-Yates shuffle; values follow in position order.
    """

    _check_count('length', length)
    if not 0.0 < density <= 1.0:
        raise _errors.InvalidArgument(f'density must be in (0, 1], got {density}.')

    nonzeros = math.floor(density * length + 0.5)
    positions = list(range(length))
    for i in range(nonzeros):
        j = i + stream.below(length - i)
        positions[i], positions[j] = positions[j], positions[i]

    vector = numpy.zeros((length, 1), order='F')
    vector[positions[:nonzeros], 0] = 1.0 - stream.uniform(nonzeros)
    return vector


def split_stream(stream: RngStream, index: typing.Annotated[int, annotated_types.Ge(0)], /) -> RngStream:
    """A child stream determined by the parent's origin seed and `index` only."""

    _, seed = splitmix64(stream.origin_seed ^ ((index * GOLDEN_GAMMA) & MASK64))
    return RngStream.from_seed(seed)
