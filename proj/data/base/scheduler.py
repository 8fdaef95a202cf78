"""Cooperative task scheduler used by the batch runner."""

import heapq
import time


class Task:
    def __init__(self, name, priority, action):
        self.name = name
        self.priority = priority
        self.action = action

    def __lt__(self, other):
        return self.priority < other.priority


class Scheduler:
    def __init__(self, clock=time.monotonic):
        self.queue = []
        self.clock = clock
        self.log = []

    def submit(self, task):
        heapq.heappush(self.queue, task)

    def run(self, budget=1.0):
        start = self.clock()
        while self.queue and self.clock() - start < budget:
            task = heapq.heappop(self.queue)
            try:
                result = task.action()
            except Exception as exc:
                self.log.append((task.name, "failed", str(exc)))
                continue
            finally:
                self.log.append((task.name, "ran", None))
            if result:
                self.log.append((task.name, "result", result))
        return len(self.queue)


def make_default():
    sched = Scheduler()
    sched.submit(Task("noop", 5, lambda: None))
    return sched
