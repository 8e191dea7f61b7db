"""Where the bits go in a fault-free run, and how overhead shrinks with c."""

from mvba.net import RunConfig, run

n, t, c = 7, 2, 256
l = 5 * (n - t) * c  # five generations

report, transcript = run(RunConfig(n, t, c, l, seed=0))
print(f"n={n} t={t} c={c} l={l}: {report.generations} generations")
for g, (data, sub) in enumerate(report.generation_bits):
    print(f"  gen {g}: data {data} bits, notification {sub} bits")
print("bits per broadcast instance:", report.b_measured)
print("agreed:", report.agreed_bits, "bits, validity", report.validity_ok)

# the first few transcript lines: round, sender, receiver, slot, payload
print(*[e.line() for e in transcript.entries[:6]], sep="\n")

# overhead falls toward n(n-1)/(n-t) as the generation grows
print("\nc       overhead")
for c in (16, 64, 256, 1024, 4096):
    r, _ = run(RunConfig(n, t, c, 10 * (n - t) * c, record_transcript=False))
    print(f"{c:<7} {r.overhead:.3f}")
print("limit  ", round(n * (n - 1) / (n - t), 3))
