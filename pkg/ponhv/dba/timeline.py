"""
Ordered list of busy intervals inside one frame.

Grants are kept as two parallel sorted lists (starts and ends). Since
intervals never overlap, sorting by start also sorts by end, so a single
bisection finds the first interval a new burst can collide with.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from typing import Iterator, Optional


class Timeline:
    __slots__ = ("guard_words", "_starts", "_ends")

    def __init__(self, guard_words: int):
        self.guard_words = guard_words
        self._starts: list[int] = []
        self._ends: list[int] = []

    def __len__(self) -> int:
        return len(self._starts)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(zip(self._starts, self._ends))

    def first_fit(self, size: int, earliest: int, latest: int) -> Optional[int]:
        """
        Earliest start ``s`` with ``earliest <= s <= latest`` such that
        ``[s, s + size)`` keeps the guard interval to every busy interval.
        Returns None when no such start exists.
        """
        if latest < earliest:
            return None
        starts, ends, guard = self._starts, self._ends, self.guard_words
        t = earliest
        # Intervals before i end at least one guard before t.
        i = bisect_right(ends, t - guard)
        n = len(starts)
        while i < n:
            if t + size + guard <= starts[i]:
                break
            t = ends[i] + guard
            if t > latest:
                return None
            i += 1
        return t

    def fits(self, start: int, size: int) -> bool:
        return self.first_fit(size, start, start) == start

    def insert(self, start: int, size: int) -> None:
        i = bisect_left(self._starts, start)
        self._starts.insert(i, start)
        self._ends.insert(i, start + size)
