"""Single-threaded discrete-event loop on an integer millisecond clock."""
from __future__ import annotations

import heapq
import itertools


class Simulator:
    def __init__(self):
        self.now = 0
        self._queue = []
        self._seq = itertools.count()

    def schedule(self, at: int, fn, *args):
        if at < self.now:
            raise ValueError(f"cannot schedule at {at} ms, clock is at {self.now} ms")
        heapq.heappush(self._queue, (at, next(self._seq), fn, args))

    def after(self, delay: int, fn, *args):
        self.schedule(self.now + delay, fn, *args)

    def run(self, until: int):
        """Execute every event with time < ``until``; the clock ends at ``until``."""
        q = self._queue
        while q and q[0][0] < until:
            at, _, fn, args = heapq.heappop(q)
            self.now = at
            fn(*args)
        self.now = until

    def __len__(self):
        return len(self._queue)
