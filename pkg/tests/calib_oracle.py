"""Scalar log-log interpolation reference used only by the tests."""
import math

POINTS = [
    (4096, 0.18e-3), (256_000, 1.2e-3), (512_000, 2e-3), (600_000, 3.2e-3), (800_000, 3.6e-3),
    (1_280_000, 5e-3), (5_120_000, 32e-3), (8_000_000, 60e-3), (15_120_000, 250e-3), (60_000_000, 630e-3),
]


def t_on(size, points=POINTS, floor=None):
    points = list(points)
    if floor is not None:
        points[0] = (points[0][0], floor)
    if size <= points[0][0]:
        return points[0][1]
    for (s0, t0), (s1, t1) in zip(points, points[1:]):
        if s0 <= size <= s1:
            if size == s1:
                return t1
            w = (math.log(size) - math.log(s0)) / (math.log(s1) - math.log(s0))
            return math.exp(math.log(t0) + w * (math.log(t1) - math.log(t0)))
    raise ValueError("size above the table")


def size_for(t, points=POINTS):
    """Real-valued read size with on-time t, by bisection on t_on."""
    lo, hi = float(points[0][0]), float(points[-1][0])
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if t_on(mid, points) < t:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)
