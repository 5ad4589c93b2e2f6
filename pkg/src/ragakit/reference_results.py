"""Reference figures for the 10-raga benchmark.

Pair matrices are [[aa, ab], [ba, bb]] with rows = predicted class and
columns = true class. Rates and accuracies are in percent, as printed
(some truncated rather than rounded).
"""

PAIR_KEYS = (("At", "Beg"), ("At", "Bi"), ("Beg", "Bi"), ("Har", "Kam"))

PAIR_COUNTS = {
    "cnn1d": {
        ("At", "Beg"): [[50, 0], [0, 63]],
        ("At", "Bi"): [[50, 2], [0, 61]],
        ("Beg", "Bi"): [[63, 4], [1, 61]],
        ("Har", "Kam"): [[70, 0], [1, 60]],
    },
    "lstm": {
        ("At", "Beg"): [[71, 1], [1, 60]],
        ("At", "Bi"): [[71, 0], [0, 55]],
        ("Beg", "Bi"): [[60, 4], [3, 55]],
        ("Har", "Kam"): [[48, 0], [3, 62]],
    },
    "ann": {
        ("At", "Beg"): [[57, 2], [1, 41]],
        ("At", "Bi"): [[57, 1], [1, 53]],
        ("Beg", "Bi"): [[41, 2], [3, 53]],
        ("Har", "Kam"): [[61, 2], [0, 56]],
    },
    "cnn2d": {
        ("At", "Beg"): [[61, 1], [0, 57]],
        ("At", "Bi"): [[61, 0], [0, 56]],
        ("Beg", "Bi"): [[57, 0], [3, 56]],
        ("Har", "Kam"): [[64, 1], [4, 58]],
    },
}

PAIR_RATES_PERCENT = {
    "cnn1d": {("At", "Beg"): 0.0, ("At", "Bi"): 1.76, ("Beg", "Bi"): 3.8, ("Har", "Kam"): 0.7},
    "lstm": {("At", "Beg"): 1.5, ("At", "Bi"): 0.0, ("Beg", "Bi"): 5.7, ("Har", "Kam"): 2.65},
    "ann": {("At", "Beg"): 2.9, ("At", "Bi"): 1.78, ("Beg", "Bi"): 4.8, ("Har", "Kam"): 1.68},
    "cnn2d": {("At", "Beg"): 0.8, ("At", "Bi"): 0.0, ("Beg", "Bi"): 2.58, ("Har", "Kam"): 3.9},
}

TEST_ACCURACY_PERCENT = {"cnn1d": 97.4, "lstm": 97.54, "ann": 97.0, "cnn2d": 98.1}
TEST_SET_SIZE = {"numeric": 702, "image": 672}
