#!/usr/bin/env python3
"""Convert a MATPOWER .m case into the JSON case format read by pinnopf."""

import argparse
import json
import re
import sys


def read_matrix(text, name):
    m = re.search(r"mpc\." + name + r"\s*=\s*\[(.*?)\];", text, re.S)
    if not m:
        return None
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%", 1)[0].strip().rstrip(";").strip()
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def read_scalar(text, name, default):
    m = re.search(r"mpc\." + name + r"\s*=\s*([-+0-9.eE]+)\s*;", text)
    return float(m.group(1)) if m else default


def linear_cost(row):
    model, ncost = int(row[0]), int(row[3])
    coeffs = row[4:4 + ncost] if model == 2 else []
    if model != 2 or ncost < 2:
        raise ValueError("only polynomial gencost rows are supported")
    return coeffs[-2]


def convert(text, name, missing_rating):
    bus = read_matrix(text, "bus")
    gen = read_matrix(text, "gen")
    branch = read_matrix(text, "branch")
    gencost = read_matrix(text, "gencost")
    if bus is None or gen is None or branch is None:
        raise ValueError("case must define mpc.bus, mpc.gen and mpc.branch")

    number = {int(b[0]): i + 1 for i, b in enumerate(bus)}
    slack = [int(b[0]) for b in bus if int(b[1]) == 3]
    if not slack:
        raise ValueError("no reference bus (type 3)")

    generators = []
    for i, g in enumerate(gen):
        if len(g) > 7 and g[7] <= 0:
            continue
        cost = linear_cost(gencost[i]) if gencost else 0.0
        generators.append({"bus": number[int(g[0])], "p_min": g[9], "p_max": g[8], "cost": cost})

    loads = [{"bus": number[int(b[0])], "p_max_nominal": b[2]} for b in bus if b[2] > 0]

    lines = []
    for br in branch:
        if len(br) > 10 and br[10] <= 0:
            continue
        if br[3] == 0:
            raise ValueError("branch %d-%d has zero reactance" % (br[0], br[1]))
        rating = br[5] if br[5] > 0 else missing_rating
        lines.append({"from_bus": number[int(br[0])], "to_bus": number[int(br[1])],
                      "susceptance": 1.0 / br[3], "flow_limit": rating})

    return {
        "name": name,
        "n_bus": len(bus),
        "slack_bus": number[slack[0]],
        "base_mva": read_scalar(text, "baseMVA", 100.0),
        "generators": generators,
        "loads": loads,
        "lines": lines,
    }


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("input", help="MATPOWER .m file")
    p.add_argument("output", help="JSON case file to write ('-' for stdout)")
    p.add_argument("--name", help="case name (defaults to the input stem)")
    p.add_argument("--missing-rating", type=float, default=9999.0,
                   help="flow limit for branches with rateA = 0 (MW)")
    args = p.parse_args()

    with open(args.input) as f:
        text = f.read()
    name = args.name or re.sub(r"\.m$", "", args.input.rsplit("/", 1)[-1])
    try:
        case = convert(text, name, args.missing_rating)
    except (ValueError, KeyError, IndexError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    out = json.dumps(case, indent=2)
    if args.output == "-":
        print(out)
    else:
        with open(args.output, "w") as f:
            f.write(out + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
