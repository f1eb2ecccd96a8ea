#!/usr/bin/env python3
"""Generate synthetic load and PV profile bundles for the bundled cases.

Usage: make_profiles.py [DATA_DIR]

Writes DATA_DIR/profiles/<case>/{profiles.csv, manifest.json}. Series are at
15-minute resolution (the simulator resamples them to 3 minutes). Loads get
one column each, shaped as residential or commercial daily curves around the
case's nominal demand and scaled so the summed peak hits a target rating.
PV output has one column per control region, with day length and clear-sky
peak drifting from winter to summer over the horizon and a random cloud
factor per day and region.
"""
import json
import math
import sys
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

DAYS = 14
STEP_MIN = 15
START = datetime(2014, 1, 6)

CASES = {
    "case33": {"penetration_ratio": 2.5, "peak_load_mw": 3.5, "pf": None, "seed": 33},
    "case141": {"penetration_ratio": 4.0, "peak_load_mw": 20.0, "pf": 0.85, "seed": 141},
}


def smooth_noise(rng, n, scale, width):
    raw = rng.normal(0.0, scale, n + 2 * width)
    kernel = np.ones(2 * width + 1) / (2 * width + 1)
    return np.convolve(raw, kernel, mode="same")[width:width + n]


def load_shape(hours, commercial):
    if commercial:
        day = np.exp(-0.5 * ((hours - 13.0) / 3.5) ** 2)
        return 0.40 + 0.55 * day
    morning = np.exp(-0.5 * ((hours - 8.0) / 1.5) ** 2)
    evening = np.exp(-0.5 * ((hours - 19.5) / 2.2) ** 2)
    return 0.40 + 0.25 * morning + 0.55 * evening


def pv_shape(hours, season):
    half = 4.5 + 3.0 * season
    peak = 0.55 + 0.45 * season
    x = (hours - 13.0) / half
    return np.where(np.abs(x) < 1.0, peak * np.clip(np.cos(0.5 * math.pi * x), 0.0, None) ** 1.5, 0.0)


def build(case, data_dir):
    spec = CASES[case]
    rng = np.random.default_rng(spec["seed"])
    network = json.loads((data_dir / "cases" / f"{case}.json").read_text())
    nominal = json.loads((data_dir / "cases" / f"{case}.nominal.json").read_text())

    n = DAYS * 24 * 60 // STEP_MIN + 1
    stamps = [START + timedelta(minutes=STEP_MIN * i) for i in range(n)]
    hours = np.array([(t - START).total_seconds() / 3600.0 % 24.0 for t in stamps])
    day_index = np.minimum(np.arange(n) * STEP_MIN // (24 * 60), DAYS - 1)
    season = day_index / (DAYS - 1)

    columns = {}
    manifest_loads = []
    for load in network["loads"]:
        bus = load["bus"]
        p_nom = nominal[str(bus)]["p_mw"]
        q_nom = nominal[str(bus)]["q_mvar"]
        commercial = rng.random() < 0.3
        level = 1.0 + 0.15 * (1.0 - season) + rng.normal(0.0, 0.04, DAYS)[day_index]
        series = p_nom * load_shape(hours, commercial) * level * (1.0 + smooth_noise(rng, n, 0.06, 2))
        columns[f"load-active_{bus}"] = np.maximum(series, 0.0)
        pf = spec["pf"] if spec["pf"] is not None else p_nom / math.hypot(p_nom, q_nom)
        manifest_loads.append({"bus": bus, "column": f"load-active_{bus}", "power_factor": round(pf, 6)})

    load_names = [f"load-active_{l['bus']}" for l in network["loads"]]
    scale = spec["peak_load_mw"] / sum(columns[c] for c in load_names).max()
    for c in load_names:
        columns[c] *= scale

    regions = sorted({pv["region"] for pv in network["pvs"]})
    for region in regions:
        cloud = np.clip(rng.normal(0.85, 0.15, DAYS), 0.35, 1.0)[day_index]
        flicker = 1.0 + smooth_noise(rng, n, 0.15, 3)
        series = pv_shape(hours, season) * cloud * np.clip(flicker, 0.5, 1.2)
        columns[f"pv-active_{region}"] = np.maximum(series, 0.0)
    manifest_pvs = [{"agent_id": pv["agent_id"], "column": f"pv-active_{pv['region']}"} for pv in network["pvs"]]

    out = data_dir / "profiles" / case
    out.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    with (out / "profiles.csv").open("w") as f:
        f.write("timestamp," + ",".join(names) + "\n")
        for i, t in enumerate(stamps):
            f.write(t.strftime("%Y-%m-%dT%H:%M:%S") + "," + ",".join(f"{columns[c][i]:.6f}" for c in names) + "\n")
    manifest = {
        "csv": "profiles.csv",
        "penetration_ratio": spec["penetration_ratio"],
        "power_factor_seed": spec["seed"],
        "loads": manifest_loads,
        "pvs": manifest_pvs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    total = sum(columns[f"load-active_{l['bus']}"] for l in network["loads"])
    print(f"{case}: {n} rows, {len(names)} series, peak load {total.max():.3f} MW")


def main():
    data_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    for case in CASES:
        build(case, data_dir)


if __name__ == "__main__":
    main()
