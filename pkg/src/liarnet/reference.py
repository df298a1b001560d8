"""Reference evaluation results for the three architectures on the
1,266-statement LIAR test split.

These are regression fixtures: the verify suite recomputes each metric table
from its confusion matrix and must reproduce every published cell at
two-decimal rounding (0.005 absolute) and every accuracy to 1e-4. Rows and
columns follow the canonical class order pants-fire, false, barely-true,
half-true, mostly-true, true; confusion rows are actual, columns predicted.
"""

import numpy as np

TEST_TOTAL = 1266
TEST_SUPPORTS = (92, 249, 212, 265, 241, 207)

REFERENCE_CONFUSIONS = {
    "bilstm": np.array([
        [32, 35, 3, 8, 14, 0],
        [4, 131, 16, 36, 59, 3],
        [5, 31, 68, 48, 60, 0],
        [0, 38, 8, 123, 95, 1],
        [1, 20, 8, 54, 158, 0],
        [2, 25, 15, 47, 90, 28],
    ], dtype=np.int64),
    "cnn": np.array([
        [36, 35, 6, 11, 2, 2],
        [7, 156, 21, 30, 28, 7],
        [5, 66, 76, 34, 29, 2],
        [2, 75, 14, 123, 48, 3],
        [1, 53, 17, 51, 119, 0],
        [3, 44, 18, 44, 65, 33],
    ], dtype=np.int64),
    "combined": np.array([
        [40, 34, 4, 10, 4, 0],
        [7, 152, 10, 67, 11, 2],
        [4, 48, 68, 83, 9, 0],
        [0, 43, 7, 193, 20, 2],
        [2, 31, 9, 112, 86, 1],
        [4, 31, 13, 89, 41, 29],
    ], dtype=np.int64),
}

REFERENCE_ACCURACY = {"bilstm": 0.4265, "cnn": 0.4289, "combined": 0.4487}

# Per class: (precision, recall, f1, support), class order as above.
REFERENCE_CLASS_METRICS = {
    "bilstm": (
        (0.73, 0.35, 0.47, 92),
        (0.47, 0.53, 0.50, 249),
        (0.58, 0.32, 0.41, 212),
        (0.39, 0.46, 0.42, 265),
        (0.33, 0.66, 0.44, 241),
        (0.88, 0.14, 0.23, 207),
    ),
    "cnn": (
        (0.67, 0.39, 0.49, 92),
        (0.36, 0.63, 0.46, 249),
        (0.50, 0.36, 0.42, 212),
        (0.42, 0.46, 0.44, 265),
        (0.41, 0.49, 0.45, 241),
        (0.70, 0.16, 0.26, 207),
    ),
    "combined": (
        (0.70, 0.43, 0.54, 92),
        (0.45, 0.61, 0.52, 249),
        (0.61, 0.32, 0.42, 212),
        (0.35, 0.73, 0.47, 265),
        (0.50, 0.36, 0.42, 241),
        (0.85, 0.14, 0.24, 207),
    ),
}

# Support-weighted (precision, recall, f1) Avg/Total rows.
REFERENCE_WEIGHTED = {
    "bilstm": (0.53, 0.43, 0.41),
    "cnn": (0.48, 0.43, 0.42),
    "combined": (0.55, 0.45, 0.43),
}

# Earlier single-encoder baselines on the same split, for context in reports.
BASELINE_ACCURACY = {"hybrid-cnn": 0.274, "hybrid-lstm": 0.415}

ACCURACY_TOLERANCE = 1e-4
# Half a hundredth, the worst case of two-decimal rounding; the tiny slack
# keeps exact boundary cases (e.g. 28/32 = 0.875 published as 0.88) inside.
CELL_TOLERANCE = 0.005 + 1e-9
