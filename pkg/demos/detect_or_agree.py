"""One generation at n=4 over GF(16): tampering is either seen or harmless."""

import numpy as np

from mvba.adversary import normal_generation
from mvba.codec import DataVector, encode, make_code_spec

spec = make_code_spec(4, 1, 4)
data = [3, 14, 6]
vals = {p.index: int(p.value[0]) for p in encode(DataVector.from_ints(data), spec)}
# row j: what the source hands peer j+1, (y_j, y_{3+j})
clean = np.array([[vals[i], vals[3 + i]] for i in (1, 2, 3)])


def play(sends):
    sends = sends[None]
    forwards = np.repeat(sends[:, :, :1], 3, axis=2)  # honest relays
    out = normal_generation(4, 1, 4, sends, forwards)
    return out.detect[0], out.decoded[0]


print("clean:", *play(clean))

bad = clean.copy()
bad[1, 0] ^= 5  # change peer 2's own symbol
print("one symbol changed:", *play(bad))

# random garbage from the source, many times; count the dangerous case
rng = np.random.default_rng(0)
sends = rng.integers(0, 16, size=(20000, 3, 2))
out = normal_generation(4, 1, 4, sends, np.repeat(sends[:, :, :1], 3, axis=2))
silent = ~out.detect.any(axis=1)
agree = (out.decoded == out.decoded[:, :1]).all(axis=(1, 2))
print(f"random sends: {silent.sum()} undetected, of which disagreeing: {(silent & ~agree).sum()}")
