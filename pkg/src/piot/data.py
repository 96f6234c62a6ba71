"""
Reference matrices used by the synthetic experiments and the acceptance suite.
"""

import numpy as np

__all__ = [
    "EXAMPLE_KERNEL",
    "EXAMPLE_MARGINAL",
    "EXAMPLE_PLAN",
    "HYPERPLANE_T1",
    "HYPERPLANE_T2",
    "BOUNDED_NOISE_T",
    "GAUSSIAN_NOISE_COST",
    "GAUSSIAN_NOISE_ALPHA",
    "MISSING_VALUE_T",
    "T_A",
    "T_B",
    "T_C",
    "SUBSPACE_T1",
    "SUBSPACE_T2",
    "SUBSPACE_T3",
    "MIGRATION_ENTRIES",
    "MIGRATION_NOISE",
    "MIGRATION_TABLE",
    "symmetric_cost",
    "semi_uniform_alpha",
]


def _ro(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


# 2x2 worked example: one row and one column pass reach the plan
EXAMPLE_KERNEL = _ro([[1.0, 0.5], [0.25, 1.0]])
EXAMPLE_MARGINAL = _ro([3 / 8, 5 / 8])
EXAMPLE_PLAN = _ro([[0.25, 0.125], [0.125, 0.5]])

# 2x3 pair with parallel but distinct cost hyperplanes
HYPERPLANE_T1 = _ro([[1, 2, 3], [2, 3, 1]])
HYPERPLANE_T2 = _ro([[1, 2, 3], [3, 2, 1]])

BOUNDED_NOISE_T = _ro([
    [0.1067, 0.1141, 0.1125],
    [0.1175, 0.1052, 0.1106],
    [0.1092, 0.1139, 0.1102],
])

GAUSSIAN_NOISE_COST = _ro([
    [0.2604, 0.0521, 0.0104],
    [0.0208, 0.2604, 0.0521],
    [0.0625, 0.0208, 0.2604],
])

GAUSSIAN_NOISE_ALPHA = _ro([
    [25, 5, 1.9],
    [3, 25, 5],
    [6, 3, 25],
])

MISSING_VALUE_T = _ro([
    [0.4583, 0.2297, 0.2633],
    [0.4631, 0.4785, 0.2755],
    [0.0785, 0.2919, 0.4611],
])

T_A = _ro([
    [0.3096, 0.3785, 0.0544, 0.2575],
    [0.2522, 0.3203, 0.1860, 0.2415],
    [0.4318, 0.1433, 0.4196, 0.0053],
    [0.0064, 0.1579, 0.3400, 0.4957],
])

T_B = _ro([
    [0.2532, 0.4143, 0.2894, 0.0431],
    [0.1925, 0.0548, 0.0958, 0.6569],
    [0.4459, 0.0905, 0.3480, 0.1156],
    [0.1083, 0.4404, 0.2669, 0.1844],
])

T_C = _ro([
    [0.4790, 0.0994, 0.0838, 0.3378],
    [0.1343, 0.1514, 0.1920, 0.5224],
    [0.1678, 0.6182, 0.1963, 0.0177],
    [0.2189, 0.1310, 0.5279, 0.1222],
])

SUBSPACE_T1 = _ro([
    [0.1104, 0.0684, 0.1545],
    [0.0505, 0.2401, 0.0428],
    [0.1725, 0.0249, 0.1360],
])

SUBSPACE_T2 = _ro([
    [0.0950, 0.1100, 0.1283],
    [0.1155, 0.0343, 0.1835],
    [0.1228, 0.1890, 0.0215],
])

SUBSPACE_T3 = _ro([
    [0.1053, 0.1193, 0.1088],
    [0.2148, 0.0090, 0.1096],
    [0.0133, 0.2051, 0.1150],
])

# Migration flows: zero-based (row, col) -> observed count for the three
# entries used in the prediction experiments. The full 9x9 table is not
# bundled; see tests/fixtures for how to supply it.
MIGRATION_ENTRIES = {(2, 5): 452.0, (3, 4): 6635.0, (4, 6): 16560.0}

# Per entry: the fixed offset added to the observation, then the ten mixture noises.
MIGRATION_NOISE = {
    (2, 5): (3.0, (7, -2, 5, 22, -22, -6, 3, 6, -24, 5)),
    (3, 4): (-131.0, (-404, 763, -118, -315, 7, 422, -16, 66, -145, 79)),
    (4, 6): (-243.0, (785, 205, 269, 525, 678, -164, 217, -180, -379, -459)),
}

# Reported predictions: entry -> (noisy-mode prediction, missing-mode prediction)
MIGRATION_TABLE = {(2, 5): (454.0, 3699.0), (3, 4): (6593.0, 7462.0), (4, 6): (16515.0, 12349.0)}


def symmetric_cost(n=10, p=1.0):
    """``c_ij = |(i - j) / n| ** p``."""
    i = np.arange(n)
    return np.abs((i[:, None] - i[None, :]) / n) ** p


def semi_uniform_alpha(n, diagonal=25.0, off=1.0):
    a = np.full((n, n), float(off))
    np.fill_diagonal(a, diagonal)
    return a
