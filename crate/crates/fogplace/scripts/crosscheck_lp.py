#!/usr/bin/env python3
"""Solve an exported placement model with an independent MILP solver.

Reads the CPLEX-LP text produced by `fogplace export-lp`, rebuilds the
matrix form, and hands it to scipy's HiGHS backend. Prints one line:

    objective <float>

or `infeasible` / `failed <status>` when no optimum exists. Exits 0 on a
solved model so callers can compare objectives, 3 on infeasibility, 2 on
parse or solver errors.
"""

import sys

import numpy as np
from scipy import optimize, sparse

SECTIONS = ("Minimize", "Subject To", "Bounds", "Binaries", "Generals", "End")


def split_sections(text):
    sections = {name: [] for name in SECTIONS}
    current = None
    for raw in text.splitlines():
        if raw.startswith("\\"):
            continue
        if raw.strip() in SECTIONS:
            current = raw.strip()
            continue
        if current is None:
            if raw.strip():
                raise ValueError(f"content before first section: {raw!r}")
            continue
        if raw.strip():
            sections[current].append(raw)
    return sections


def logical_rows(lines):
    """Rows start with a `name:` token; wrapped continuations do not."""
    rows = []
    for line in lines:
        tokens = line.split()
        if tokens and tokens[0].endswith(":"):
            rows.append(tokens)
        else:
            if not rows:
                raise ValueError(f"continuation before any row: {line!r}")
            rows[-1].extend(tokens)
    return rows


def parse_terms(tokens):
    """Tokens of the form `[+-] coef var ...` into a list of (coef, var)."""
    terms = []
    sign = 1.0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "+":
            sign = 1.0
            i += 1
        elif tok == "-":
            sign = -1.0
            i += 1
        else:
            coef = float(tok)
            var = tokens[i + 1]
            terms.append((sign * coef, var))
            sign = 1.0
            i += 2
    return terms


def parse_constraint(tokens):
    name = tokens[0].rstrip(":")
    for sense in ("<=", ">=", "="):
        if sense in tokens:
            at = tokens.index(sense)
            break
    else:
        raise ValueError(f"row {name} has no sense token")
    terms = parse_terms(tokens[1:at])
    rhs = float(tokens[at + 1])
    return name, terms, sense, rhs


def parse_bound(tokens):
    if len(tokens) == 3 and tokens[1] in ("<=", "="):
        return tokens[0], tokens[1], float(tokens[2])
    if len(tokens) == 5 and tokens[1] == "<=" and tokens[3] == "<=":
        # `lb <= var <= ub` is not emitted today but costs nothing to accept.
        return tokens[2], "range", (float(tokens[0]), float(tokens[4]))
    raise ValueError(f"unrecognised bound: {' '.join(tokens)}")


def main():
    if len(sys.argv) != 2:
        print("usage: crosscheck_lp.py MODEL.lp", file=sys.stderr)
        return 2

    with open(sys.argv[1], encoding="utf-8") as fh:
        sections = split_sections(fh.read())

    objective_rows = logical_rows(sections["Minimize"])
    if len(objective_rows) != 1:
        raise ValueError("expected exactly one objective row")
    objective = parse_terms(objective_rows[0][1:])

    constraints = [parse_constraint(r) for r in logical_rows(sections["Subject To"])]
    bounds_rows = [parse_bound(line.split()) for line in sections["Bounds"]]
    binaries = {tok for line in sections["Binaries"] for tok in line.split()}
    generals = {tok for line in sections["Generals"] for tok in line.split()}

    order = {}

    def index(var):
        if var not in order:
            order[var] = len(order)
        return order[var]

    for _, var in objective:
        index(var)
    for _, terms, _, _ in constraints:
        for _, var in terms:
            index(var)
    for var in sorted(binaries | generals):
        index(var)

    n = len(order)
    c = np.zeros(n)
    for coef, var in objective:
        c[order[var]] += coef

    data, rows, cols, lo, hi = [], [], [], [], []
    for row, (_, terms, sense, rhs) in enumerate(constraints):
        for coef, var in terms:
            data.append(coef)
            rows.append(row)
            cols.append(order[var])
        lo.append(rhs if sense in (">=", "=") else -np.inf)
        hi.append(rhs if sense in ("<=", "=") else np.inf)
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(len(constraints), n))

    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for var in binaries:
        ub[order[var]] = 1.0
    for entry in bounds_rows:
        if entry[1] == "range":
            lb[order[entry[0]]], ub[order[entry[0]]] = entry[2]
        elif entry[1] == "=":
            lb[order[entry[0]]] = ub[order[entry[0]]] = entry[2]
        else:
            ub[order[entry[0]]] = entry[2]

    integrality = np.zeros(n)
    for var in binaries | generals:
        integrality[order[var]] = 1

    result = optimize.milp(
        c,
        constraints=optimize.LinearConstraint(matrix, lo, hi),
        bounds=optimize.Bounds(lb, ub),
        integrality=integrality,
        options={"mip_rel_gap": 0.0},
    )
    if result.status == 2:
        print("infeasible")
        return 3
    if not result.success:
        print(f"failed {result.status}")
        return 2
    print(f"objective {result.fun!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
