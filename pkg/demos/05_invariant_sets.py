# Exact maximal control invariant set and a vertex-wise invariance check.
from pwlcis import certify_invariance, load_config, maximal_ci_oracle, polygon_2d, polygon_area

cfg = load_config("example1")
res = maximal_ci_oracle(cfg.system, cfg.X, cfg.U, max_iters=50)
print("converged:", res.converged, "after", res.iterations, "iterations,", res.omega.n_rows, "rows")
print("area:", polygon_area(polygon_2d(res.omega)))

cert = certify_invariance(res.omega, cfg.system, cfg.U)
print("worst vertex violation:", f"{cert.max_violation:.1e}", " certified:", cert.certified)

# The state box itself is not invariant: some corner has no admissible input.
cert_box = certify_invariance(cfg.X, cfg.system, cfg.U)
print("state box itself: worst violation", f"{cert_box.max_violation:.3f}")
