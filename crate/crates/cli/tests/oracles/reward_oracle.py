"""Independent reward oracle for the acceptance suite.

Prints one Rust tuple per hand-built transition:
(p_t, p_next, goal, min_beam, terminal, (c_f, c_p, c_c), y_axis, expected).
"""
import math

CASES = [
    # p_t, p_next, goal, min_beam, terminal, coeffs, y_axis
    ((0.0, 0.0), (0.0, 0.0), (0.0, 5.0), 1.0, False, (1, 1, 1), False),
    ((0.0, 0.0), (0.0, 0.3), (0.0, 5.0), 2.0, True, (1, 1, 1), False),
    ((0.0, 0.0), (0.1, 0.25), (9.0, -3.0), 1.0, False, (0, 1, 0), True),
    ((1.0, 1.0), (1.0, 1.0), (4.0, 5.0), 0.5, False, (1, 0, 0), False),
    ((1.0, 1.0), (1.0, 1.0), (4.0, 5.0), 0.5, True, (1, 0, 0), False),
    ((1.0, 1.0), (1.3, 1.4), (4.0, 5.0), 0.8, False, (0, 1, 0), False),
    ((1.0, 1.0), (1.4, 0.7), (4.0, 5.0), 0.8, False, (0, 1, 0), False),
    ((2.0, 2.0), (2.5, 1.5), (5.0, 5.0), 0.25, False, (0, 1, 0), False),
    ((2.0, 2.0), (1.0, 2.0), (5.0, 2.0), 1.5, False, (0, 1, 0), False),
    ((0.0, 0.0), (0.7, -0.2), (0.0, 10.0), 1.2, False, (0, 1, 0), True),
    ((3.0, 1.0), (3.2, 1.9), (3.0, 9.0), 0.3, False, (1, 1, 0.05), True),
    ((3.0, 1.0), (3.2, 1.9), (3.0, 9.0), 0.3, False, (1, 1, 0.05), False),
    ((0.0, 0.0), (0.0, 0.0), (1.0, 1.0), 0.1, False, (0, 0, 1), False),
    ((0.0, 0.0), (0.0, 0.0), (1.0, 1.0), 2.0, False, (0, 0, 1), False),
    ((0.0, 0.0), (0.0, 0.0), (1.0, 1.0), 0.37, False, (0, 0, 2.5), False),
    ((5.0, 0.5), (5.1, 2.3), (5.0, 9.5), 0.45, True, (1, 1, 0.05), True),
    ((5.0, 0.5), (4.2, 1.1), (-1.0, 3.0), 0.9, False, (2, 0.5, 0.1), False),
    ((-2.0, 3.0), (-1.0, 4.0), (10.0, 3.0), 1.1, False, (0.3, 1.7, 0.2), False),
    ((4.4, 4.4), (4.4, 4.1), (4.4, 9.0), 0.6, False, (1, 1, 0.05), True),
    ((0.5, 0.5), (0.9, 0.8), (0.9, 0.8), 0.33, True, (1, 1, 0.05), False),
]


def reward(p, q, g, d, terminal, c, y_axis):
    r_f = 0.0 if terminal else -1.0
    if y_axis:
        r_p = q[1] - p[1]
    else:
        gx, gy = g[0] - p[0], g[1] - p[1]
        norm = math.sqrt(gx * gx + gy * gy)
        r_p = ((q[0] - p[0]) * gx + (q[1] - p[1]) * gy) / norm
    r_c = -1.0 / d
    return c[0] * r_f + c[1] * r_p + c[2] * r_c


def f(x):
    return repr(float(x))


for p, q, g, d, t, c, y in CASES:
    v = reward(p, q, g, d, t, c, y)
    print(
        f"    (([{f(p[0])}, {f(p[1])}], [{f(q[0])}, {f(q[1])}], [{f(g[0])}, {f(g[1])}]), {f(d)}, {str(t).lower()}, "
        f"({f(c[0])}, {f(c[1])}, {f(c[2])}), {str(y).lower()}, {f(v)}),"
    )
