# Dense QP and LP solvers on small problems with known answers.
import numpy as np

from pwlcis import LpProblem, QpProblem, solve_lp, solve_qp

# Projection of (2, 2) onto the half-plane x + y <= 1: the answer is (0.5, 0.5)
# and the multiplier of the single row is 1.5.
qp = QpProblem(np.eye(2), [-2.0, -2.0], [[1.0, 1.0]], [1.0])
out = solve_qp(qp)
print("QP status:", out.status.value)
print("x* =", out.point, " lambda =", out.ineq_dual, " KKT residual =", f"{out.kkt_residual:.1e}")

# Warm starting from a feasible guess lands on the same point.
warm = solve_qp(qp, x0=[0.0, 0.0])
print("warm start x* =", warm.point, "iterations:", warm.iterations)

# A small LP: maximise x + y over the unit box intersected with x + 2y <= 2.
lp = LpProblem([-1.0, -1.0],
               [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 2]],
               [1, 1, 1, 1, 2])
res = solve_lp(lp)
print("LP status:", res.status.value, "x* =", res.point, "value =", res.objective)

# Infeasible and unbounded problems are reported, not raised.
print(solve_lp(LpProblem([1.0], [[1.0], [-1.0]], [-1.0, -1.0])).status.value)
print(solve_lp(LpProblem([-1.0], [[-1.0]], [0.0])).status.value)
