import math
from functools import lru_cache


def distance(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


def perimeter(points):
    total = 0.0
    for i, p in enumerate(points):
        total += distance(p, points[(i + 1) % len(points)])
    return total


@lru_cache(maxsize=128)
def regular_polygon_area(sides, radius):
    if sides < 3:
        raise ValueError("need at least three sides")
    return 0.5 * sides * radius * radius * math.sin(2 * math.pi / sides)


class Rect:
    def __init__(self, w, h):
        self.w = w
        self.h = h

    @property
    def area(self):
        return self.w * self.h

    def scale(self, factor):
        return Rect(self.w * factor, self.h * factor)
