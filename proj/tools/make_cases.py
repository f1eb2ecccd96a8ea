#!/usr/bin/env python3
"""Convert MATPOWER radial feeders into the native JSON case format.

Usage: make_cases.py MATPOWER_DATA_DIR OUT_DIR

Bus labels are kept from the source file except the source slack, which is
relabelled 0. Tie switches (out-of-service branches) are dropped so the
result is a tree. Region partitions and PV placements are fixed below and
follow the main-feeder / lateral-path construction.
"""
import json
import math
import re
import sys
from pathlib import Path

BASE_MVA = 1.0


def matrix(text, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S)
    rows = []
    for line in m.group(1).split("\n"):
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def subtree(children, root):
    out, stack = [], [root]
    while stack:
        u = stack.pop()
        out.append(u)
        stack.extend(children.get(u, []))
    return out


def load_feeder(path, kva_pf=None):
    text = Path(path).read_text()
    bus = matrix(text, "bus")
    branch = [r for r in matrix(text, "branch") if r[10] == 1]
    kv = bus[0][9]
    z_base = kv * kv / BASE_MVA
    label = lambda b: 0 if int(b) == 1 else int(b)
    buses = [{"index": label(r[0]), "nominal_kv": kv,
              "v_min_pu": 0.95, "v_max_pu": 1.05} for r in bus]
    branches = [{"from": label(r[0]), "to": label(r[1]),
                 "r_pu": round(r[2] / z_base, 12), "x_pu": round(r[3] / z_base, 12),
                 "tap_ratio": 1.0} for r in branch]
    nominal = {}
    for r in bus:
        pd, qd = r[2] / 1e3, r[3] / 1e3
        if kva_pf is not None:
            pd, qd = pd * kva_pf, pd * math.sin(math.acos(kva_pf))
        if pd > 0:
            nominal[label(r[0])] = (pd, qd)
    children = {}
    for b in branches:
        children.setdefault(b["from"], []).append(b["to"])
    return buses, branches, nominal, children


def pv_entries(placement, nominal_total_pv):
    pvs = []
    agent = 0
    count = sum(len(b) for _, b in placement)
    for region, buses in placement:
        for b in buses:
            pvs.append({"bus": b, "agent_id": agent,
                        "s_max_mva": round(1.2 * nominal_total_pv / count, 6),
                        "region": region})
            agent += 1
    return pvs


def write_case(out, name, buses, branches, nominal, regions, placement,
               action_bound, pv_total):
    doc = {
        "name": name,
        "base_power_mva": BASE_MVA,
        "v_ref_pu": 1.0,
        "action_bound": action_bound,
        "buses": sorted(buses, key=lambda b: b["index"]),
        "branches": branches,
        "pvs": pv_entries(placement, pv_total),
        "loads": [{"bus": b, "profile_id": b} for b in sorted(nominal)],
        "regions": [{"id": rid, "buses": sorted(bs)} for rid, bs in regions],
    }
    Path(out).write_text(json.dumps(doc, indent=1) + "\n")
    meta = {str(b): {"p_mw": p, "q_mvar": q} for b, (p, q) in sorted(nominal.items())}
    Path(out).with_suffix(".nominal.json").write_text(json.dumps(meta, indent=1) + "\n")


def case33(src, out):
    buses, branches, nominal, _ = load_feeder(Path(src) / "case33bw.m")
    # main feeder 1-6; regions are the lateral paths down to each terminal
    regions = [(1, range(7, 19)), (2, range(19, 23)), (3, range(23, 26)), (4, range(26, 34))]
    placement = [(1, [13, 18]), (2, [22]), (3, [25]), (4, [29, 33])]
    write_case(out, "case33", buses, branches, nominal,
               [(r, list(b)) for r, b in regions], placement, 0.8, 8.75)


def case141(src, out):
    buses, branches, nominal, children = load_feeder(Path(src) / "case141.m", kva_pf=0.85)
    st = lambda r: set(subtree(children, r))
    regions = [
        (1, {33, 34, 35, 36, 111}),
        (2, st(54)),
        (3, st(44)),
        (4, st(37) - st(54) - st(44)),
        (5, st(91)),
        (6, st(88) - st(91)),
        (7, st(118)),
        (8, set(range(8, 20)) | {112, 113, 114, 115, 116, 117, 135, 136, 137}),
        (9, set(range(20, 33)) | {138, 139, 140, 141}),
    ]
    placement = [
        (1, [36, 111]),
        (2, [62, 69, 72]),
        (3, [77, 84, 87]),
        (4, [53, 74]),
        (5, [100 if 100 in st(91) else 94, 106, 110]),
        (6, [98, 100]),
        (7, [124, 130, 133]),
        (8, [116, 137]),
        (9, [32, 141]),
    ]
    # keep every PV inside its own region
    fixed = []
    for rid, bs in placement:
        members = dict(regions)[rid]
        fixed.append((rid, [b for b in bs if b in members]))
    write_case(out, "case141", buses, branches, nominal,
               [(r, list(b)) for r, b in regions], fixed, 0.6, 80.0)


def case2(out):
    doc = {
        "name": "case2",
        "base_power_mva": BASE_MVA,
        "v_ref_pu": 1.0,
        "action_bound": 0.8,
        "buses": [
            {"index": 0, "nominal_kv": 12.66, "v_min_pu": 0.95, "v_max_pu": 1.05},
            {"index": 1, "nominal_kv": 12.66, "v_min_pu": 0.95, "v_max_pu": 1.05},
        ],
        "branches": [{"from": 0, "to": 1, "r_pu": 0.1, "x_pu": 0.1, "tap_ratio": 1.0}],
        "pvs": [{"bus": 1, "agent_id": 0, "s_max_mva": 0.3, "region": 1}],
        "loads": [{"bus": 1, "profile_id": 1}],
        "regions": [{"id": 1, "buses": [1]}],
    }
    Path(out).write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    src, dst = sys.argv[1], Path(sys.argv[2])
    case2(dst / "case2.json")
    case33(src, dst / "case33.json")
    case141(src, dst / "case141.json")
