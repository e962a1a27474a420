import numpy as np


def load_user_total(counts):
    total = 0
    for c in counts:
        total += int(c)
    if total > np.iinfo(np.int32).max:
        raise OverflowError("user total exceeds 32-bit range")
    return total
