#!/usr/bin/env python3
"""External SDP backend for gbarrier using Clarabel.

Usage: clarabel_adapter.py <problem.sdp> <solution.txt>

Reads the sparse dump written by gbarrier and writes the status/x solution
format read by its external-solver adapter. Requires the `clarabel`, `numpy`
and `scipy` Python packages.
"""

import sys

import clarabel
import numpy as np
import scipy.sparse as sp


def read_dump(path):
    n_free = 0
    dims = []
    m = 0
    b, c, rows, cols, vals = {}, {}, [], [], []
    with open(path) as f:
        for line in f:
            t = line.split()
            if not t:
                continue
            if t[0] == "sdp":
                continue
            if t[0] == "free":
                n_free = int(t[1])
            elif t[0] == "blocks":
                dims = [int(d) for d in t[2:]]
            elif t[0] == "rows":
                m = int(t[1])
            elif t[0] == "b":
                b[int(t[1])] = float(t[2])
            elif t[0] == "c":
                c[int(t[1])] = float(t[2])
            elif t[0] == "a":
                rows.append(int(t[1]))
                cols.append(int(t[2]))
                vals.append(float(t[3]))
            else:
                raise ValueError(f"unknown dump line: {line.strip()}")
    return n_free, dims, m, b, c, rows, cols, vals


def main():
    problem, solution = sys.argv[1], sys.argv[2]
    n_free, dims, m, b, c, rows, cols, vals = read_dump(problem)
    nblk = sum(d * (d + 1) // 2 for d in dims)
    n = n_free + nblk

    a_eq = sp.csc_matrix((vals, (rows, cols)), shape=(m, n))
    # Block columns live in PSD cones: -x + s = 0, s in PSDTriangle.
    a_psd = sp.hstack([sp.csc_matrix((nblk, n_free)), -sp.identity(nblk, format="csc")], format="csc")
    a = sp.vstack([a_eq, a_psd], format="csc")
    rhs = np.zeros(m + nblk)
    for i, v in b.items():
        rhs[i] = v
    q = np.zeros(n)
    for j, v in c.items():
        q[j] = v
    cones = [clarabel.ZeroConeT(m)] + [clarabel.PSDTriangleConeT(d) for d in dims]

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = 500
    settings.tol_feas = 1e-9
    settings.tol_gap_abs = 1e-9
    settings.tol_gap_rel = 1e-9
    sol = clarabel.DefaultSolver(sp.csc_matrix((n, n)), q, a, rhs, cones, settings).solve()

    status = str(sol.status)
    if status in ("Solved", "AlmostSolved"):
        word = "optimal" if c else "feasible"
    elif status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        word = "infeasible"
    elif status in ("DualInfeasible", "AlmostDualInfeasible"):
        word = "dual_infeasible"
    elif status == "MaxIterations":
        word = "iteration_limit"
    else:
        word = "numerical_failure"

    with open(solution, "w") as f:
        f.write(f"status {word}\n")
        if word in ("optimal", "feasible"):
            for j, v in enumerate(sol.x):
                if v != 0.0:
                    f.write(f"x {j} {float(v)!r}\n")


if __name__ == "__main__":
    main()
