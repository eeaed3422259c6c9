#!/usr/bin/env python3
"""Solve an LP file (the dialect written by `stlpde`) with scipy's HiGHS MILP.

usage: scipy_milp_solve.py MODEL.lp SOLUTION.sol [TIME_LIMIT_S]

The solution file holds a status line, the objective and "name value" lines.
After the MILP the binaries are fixed and the LP is re-solved with tight
tolerances so the reported control reproduces the objective closely.
"""

import re
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.sparse import csr_matrix, vstack

SECTIONS = {"maximize": "obj", "maximise": "obj", "minimize": "min", "minimise": "min",
            "subject": "st", "bounds": "bounds", "binaries": "bin", "binary": "bin", "end": "end"}
TOKEN = re.compile(r"<=|>=|=<|=>|[<>=]|[+-]|[^\s<>=+-]+")
NUMBER = re.compile(r"^(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$|^inf(inity)?$", re.I)


def tokenize(text):
    out = []
    for line in text.splitlines():
        line = line.split("\\", 1)[0]
        raw = TOKEN.findall(line)
        # re-join exponents split by the +/- rule, e.g. "1e" "-" "05"
        i = 0
        while i < len(raw):
            t = raw[i]
            if re.match(r"^\d+\.?\d*[eE]$|^\.\d+[eE]$", t) and i + 2 < len(raw) and raw[i + 1] in "+-":
                out.append(t + raw[i + 1] + raw[i + 2])
                i += 3
                continue
            out.append(t)
            i += 1
    return out


class Model:
    def __init__(self):
        self.names = []
        self.index = {}
        self.lo = []
        self.hi = []
        self.binary = []
        self.obj = {}
        self.sense = 1.0
        self.rows = []  # (coefs dict, op, rhs)

    def var(self, name):
        j = self.index.get(name)
        if j is None:
            j = len(self.names)
            self.index[name] = j
            self.names.append(name)
            self.lo.append(0.0)
            self.hi.append(np.inf)
            self.binary.append(False)
        return j


def parse(text):
    m = Model()
    toks = tokenize(text)
    p = 0
    sec = None

    def expr():
        nonlocal p
        terms = {}
        sign, coef = 1.0, None
        while p < len(toks):
            t = toks[p]
            if t in ("<=", ">=", "=<", "=>", "<", ">", "=") or t.lower() in SECTIONS:
                break
            if t.endswith(":") and coef is None and sign == 1.0:
                break
            if t == "+":
                p += 1
                continue
            if t == "-":
                sign = -sign
                p += 1
                continue
            if NUMBER.match(t):
                coef = (coef if coef is not None else 1.0) * float(t)
                p += 1
                continue
            j = m.var(t)
            terms[j] = terms.get(j, 0.0) + sign * (coef if coef is not None else 1.0)
            sign, coef = 1.0, None
            p += 1
        return terms

    def number():
        nonlocal p
        sign = 1.0
        while toks[p] in "+-":
            sign = -sign if toks[p] == "-" else sign
            p += 1
        v = float(toks[p])
        p += 1
        return sign * v

    while p < len(toks):
        t = toks[p]
        key = SECTIONS.get(t.lower())
        if key is not None:
            sec = key
            p += 1
            if key == "st" and p < len(toks) and toks[p].lower() == "to":
                p += 1
            if key == "end":
                break
            continue
        if sec in ("obj", "min"):
            m.sense = 1.0 if sec == "obj" else -1.0
            if t.endswith(":"):
                p += 1
            m.obj = expr()
        elif sec == "st":
            if t.endswith(":"):
                p += 1
            terms = expr()
            op = toks[p]
            p += 1
            m.rows.append((terms, op, number()))
        elif sec == "bounds":
            if NUMBER.match(t) or t in "+-":
                lo = number()
                p += 1  # <=
                j = m.var(toks[p])
                p += 1
                m.lo[j] = lo
                if p < len(toks) and toks[p] in ("<=", "<", "=<"):
                    p += 1
                    m.hi[j] = number()
            else:
                j = m.var(t)
                p += 1
                if toks[p].lower() == "free":
                    m.lo[j], m.hi[j] = -np.inf, np.inf
                    p += 1
                    continue
                op = toks[p]
                p += 1
                v = number()
                if op == "=":
                    m.lo[j] = m.hi[j] = v
                elif op.startswith("<") or op == "=<":
                    m.hi[j] = v
                else:
                    m.lo[j] = v
        elif sec == "bin":
            j = m.var(t)
            m.binary[j] = True
            m.lo[j], m.hi[j] = 0.0, 1.0
            p += 1
        else:
            raise SystemExit("LP text must start with an objective section")
    return m


def assemble(m):
    n = len(m.names)
    c = np.zeros(n)
    for j, v in m.obj.items():
        c[j] = -m.sense * v  # scipy minimizes
    data, ri, ci, lo, hi = [], [], [], [], []
    for r, (terms, op, rhs) in enumerate(m.rows):
        for j, v in terms.items():
            data.append(v)
            ri.append(r)
            ci.append(j)
        lo.append(rhs if op in (">=", "=>", ">", "=") else -np.inf)
        hi.append(rhs if op in ("<=", "=<", "<", "=") else np.inf)
    a = csr_matrix((data, (ri, ci)), shape=(len(m.rows), n))
    return c, a, np.array(lo), np.array(hi)


def main():
    if len(sys.argv) < 3:
        raise SystemExit(__doc__)
    lp_path, sol_path = sys.argv[1], sys.argv[2]
    limit = float(sys.argv[3]) if len(sys.argv) > 3 else 600.0
    with open(lp_path) as f:
        m = parse(f.read())
    c, a, rlo, rhi = assemble(m)
    lo, hi = np.array(m.lo), np.array(m.hi)
    integrality = np.array(m.binary, dtype=int)

    res = milp(c, constraints=LinearConstraint(a, rlo, rhi), bounds=Bounds(lo, hi), integrality=integrality,
               options={"time_limit": limit, "mip_rel_gap": 1e-9, "presolve": True})
    lines = []
    if res.x is None:
        status = "infeasible" if res.status == 2 else ("timelimit" if res.status == 1 else None)
        if status is None:
            print(f"milp failed: {res.message}", file=sys.stderr)
            return 1
        with open(sol_path, "w") as f:
            f.write(f"status {status}\n")
        return 0
    status = "optimal" if res.status == 0 else "timelimit"
    x = res.x

    # Polish: fix the binaries and re-solve the LP with tight tolerances.
    flo, fhi = lo.copy(), hi.copy()
    bins = integrality.astype(bool)
    flo[bins] = fhi[bins] = np.round(x[bins])
    eq = rlo == rhi
    up, dn = ~eq & np.isfinite(rhi), ~eq & np.isfinite(rlo)
    a_ub = vstack([a[up], -a[dn]]).tocsr()
    b_ub = np.concatenate([rhi[up], -rlo[dn]])
    pol = linprog(c, A_ub=a_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                  A_eq=a[eq] if eq.any() else None, b_eq=rlo[eq] if eq.any() else None,
                  bounds=np.column_stack([flo, fhi]), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if pol.status == 0:
        x = pol.x
    objective = float(m.sense * -(c @ x))
    lines.append(f"status {status}")
    lines.append(f"objective {objective!r}")
    gap = getattr(res, "mip_gap", None)
    if gap is not None and np.isfinite(gap):
        lines.append(f"gap {float(gap)!r}")
    for name, v in zip(m.names, x):
        lines.append(f"{name} {float(v)!r}")
    with open(sol_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
