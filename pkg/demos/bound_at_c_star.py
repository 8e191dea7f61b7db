"""Pick c from c_star and compare the bit count against the closed-form bound."""

import math

from mvba.net import RunConfig, bits_bound, c_star, run

l = 10**6
for n, t in [(4, 1), (7, 2)]:
    c = math.ceil(c_star(n, t, l))
    print(f"n={n} t={t}: c_star={c_star(n, t, l):.2f}, using c={c}")
    for name in ("honest", "tampering_peer", "lying_claims"):
        r, _ = run(RunConfig(n, t, c, l, name, record_transcript=False))
        bound = bits_bound(n, t, l, r.b_measured)
        print(f"  {name:15s} {r.bits_total:>10d} bits  bound {bound:>12.0f}  "
              f"phases {r.broadcast_phases}  ratio {r.bits_total / bound:.3f}")

# c_star balances the worst case; a particular strategy may favour a different c,
# but very small or very large symbols are costly either way
n, t = 7, 2
print("\nc      total bits (lying_claims)")
for c in (16, 32, 61, 128, 512):
    r, _ = run(RunConfig(n, t, c, l, "lying_claims", record_transcript=False))
    print(f"{c:<6} {r.bits_total}")
