"""Every built-in strategy once, at n=7, with what the diagnosis graph learned."""

from mvba.adversary import STRATEGIES
from mvba.net import RunConfig, run

n, t, c, l = 7, 2, 8, 400

for name in STRATEGIES:
    r, _ = run(RunConfig(n, t, c, l, name, seed=1))
    print(f"{name:28s} corrupted={r.corrupted} phases={r.broadcast_phases} "
          f"isolated={r.isolated} agree={r.disagreements == 0} valid={r.validity_ok}")
    if r.f_edges:
        print(" " * 29, "f-edges:", r.f_edges)
    if r.default_terminated:
        print(" " * 29, "source convicted, default from generation", r.default_from_generation)

# parameters are passed the same way the CLI takes them
r, _ = run(RunConfig(n, t, c, l, "tampering_peer", {"node": 4, "rate": 1.0}))
print("\ntampering node 4 at full rate ->", r.f_edges)
