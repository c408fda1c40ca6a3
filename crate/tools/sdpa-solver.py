#!/usr/bin/env python3
"""SDPA sparse (.dat-s) solver with CSDP-compatible output files.

Usage: sdpa-solver.py problem.dat-s solution.sol

Reads the block-diagonal semidefinite program

    (P)  min  c^T x   s.t.  X = sum_k x_k F_k - F_0,  X >= 0

from the SDPA sparse file, solves it with cvxopt's cone LP solver, and
writes the solution the way CSDP does: the dual vector y on the first
line, then "1 blkno i j value" lines for Z = sum y_k F_k - F_0 and
"2 blkno i j value" lines for the primal matrix X (the PSD multipliers),
which is what the certification stage consumes.

Exit codes: 0 solved, 2 bad usage/input, 3 solver failure.
"""
import sys


def fail(code, msg):
    print("sdpa-solver: " + msg, file=sys.stderr)
    sys.exit(code)


def parse_dats(path):
    """Returns (m, sizes, rhs, entries)."""
    with open(path) as fh:
        lines = fh.readlines()
    data = []
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped[0] in '"*':
            continue
        data.append(stripped)
    if len(data) < 4:
        fail(2, "truncated SDPA file")
    m = int(data[0].split()[0])
    nblocks = int(data[1].split()[0])
    sizes = []
    for tok in data[2].replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " ").split():
        sizes.append(int(tok))
    if len(sizes) != nblocks:
        fail(2, "block size list does not match the block count")
    rhs_tokens = data[3].replace(",", " ").split()
    rhs = [float(t) for t in rhs_tokens]
    if len(rhs) != m:
        fail(2, "right-hand side has %d entries, expected %d" % (len(rhs), m))
    entries = []
    for raw in data[4:]:
        toks = raw.replace(",", " ").split()
        if len(toks) != 5:
            fail(2, "bad entry line: %r" % raw)
        matno, blk, i, j = (int(t) for t in toks[:4])
        val = float(toks[4])
        if not (0 <= matno <= m):
            fail(2, "matrix number %d out of range" % matno)
        if not (1 <= blk <= nblocks):
            fail(2, "block number %d out of range" % blk)
        entries.append((matno, blk, i, j, val))
    return m, sizes, rhs, entries


def main():
    if len(sys.argv) != 3:
        fail(2, "usage: sdpa-solver.py problem.dat-s solution.sol")
    try:
        from cvxopt import matrix, solvers
    except ImportError:
        fail(3, "cvxopt is not installed (pip install cvxopt)")

    m, sizes, rhs, entries = parse_dats(sys.argv[1])

    psd_blocks = [b for b, s in enumerate(sizes) if s > 0]
    diag_blocks = [b for b, s in enumerate(sizes) if s < 0]
    psd_index = {b: k for k, b in enumerate(psd_blocks)}

    # F matrices per (matno, block) as dicts {(i,j): v} with i <= j.
    fmat = {}
    for matno, blk, i, j, val in entries:
        key = (matno, blk - 1)
        smaller, larger = min(i, j) - 1, max(i, j) - 1
        fmat.setdefault(key, {})[(smaller, larger)] = val

    # PSD part: hs[k] - sum_j x_j mat(Gs[k][:, j]) >= 0  with
    # hs[k] = -F_0[blk], Gs[k][:, j] = -vec(F_{j+1}[blk]).
    Gs, hs = [], []
    for blk in psd_blocks:
        s = sizes[blk]
        g = matrix(0.0, (s * s, m))
        for col in range(m):
            for (i, j), val in fmat.get((col + 1, blk), {}).items():
                g[i + j * s, col] = -val
                g[j + i * s, col] = -val
        h = matrix(0.0, (s, s))
        for (i, j), val in fmat.get((0, blk), {}).items():
            h[i, j] = -val
            h[j, i] = -val
        Gs.append(g)
        hs.append(h)

    # Diagonal blocks become componentwise inequalities.
    rows = []
    for blk in diag_blocks:
        s = -sizes[blk]
        for i in range(s):
            rows.append((blk, i))
    if rows:
        Gl = matrix(0.0, (len(rows), m))
        hl = matrix(0.0, (len(rows), 1))
        for r, (blk, i) in enumerate(rows):
            for col in range(m):
                val = fmat.get((col + 1, blk), {}).get((i, i))
                if val is not None:
                    Gl[r, col] = -val
            v0 = fmat.get((0, blk), {}).get((i, i))
            if v0 is not None:
                hl[r] = -v0
    else:
        Gl = None
        hl = None

    c = matrix(rhs)
    solvers.options["show_progress"] = False
    solvers.options["maxiters"] = 200
    try:
        sol = solvers.sdp(c, Gl=Gl, hl=hl, Gs=Gs, hs=hs)
    except Exception as exc:  # cvxopt raises on structural problems
        fail(3, "cvxopt raised: %s" % exc)
    if sol["status"] != "optimal":
        fail(3, "solver status: %s" % sol["status"])

    x = [sol["x"][k] for k in range(m)]

    out = []
    out.append(" ".join("%.17e" % v for v in x))

    def emit(matno, blk, i, j, val):
        out.append("%d %d %d %d %.17e" % (matno, blk + 1, i + 1, j + 1, val))

    # Z = sum x_k F_k - F_0 per block (matno 1).
    for blk, size in enumerate(sizes):
        s = abs(size)
        acc = {}
        for col in range(m):
            for (i, j), val in fmat.get((col + 1, blk), {}).items():
                acc[(i, j)] = acc.get((i, j), 0.0) + x[col] * val
        for (i, j), val in fmat.get((0, blk), {}).items():
            acc[(i, j)] = acc.get((i, j), 0.0) - val
        for i in range(s):
            acc.setdefault((i, i), 0.0)
        for (i, j) in sorted(acc):
            emit(1, blk, i, j, acc[(i, j)])

    # X (matno 2): PSD multipliers zs, diagonal multipliers zl.
    for blk in psd_blocks:
        s = sizes[blk]
        z = sol["zs"][psd_index[blk]]
        for i in range(s):
            for j in range(i, s):
                emit(2, blk, i, j, z[i, j])
    if rows:
        zl = sol["zl"]
        for r, (blk, i) in enumerate(rows):
            emit(2, blk, i, i, zl[r])

    with open(sys.argv[2], "w") as fh:
        fh.write("\n".join(out) + "\n")
    print("sdpa-solver: optimal, primal objective %.12f" % sol["primal objective"])
    sys.exit(0)


if __name__ == "__main__":
    main()
