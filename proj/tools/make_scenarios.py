#!/usr/bin/env python3
"""Regenerates the bundled scenario files under scenarios/."""

import json
import math
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent / "scenarios"

COLORS = {
    "healthy": [40, 160, 50],
    "unhealthy": [220, 200, 40],
    "flower": [245, 245, 240],
}
STEM_HEIGHT = 0.42
BED_Y = 0.62
APPROACH_DX = 0.20
APPROACH_Y = 0.20


def heading(frm, to):
    return math.atan2(to[1] - frm[1], to[0] - frm[0])


def make_part(rng, pid, kind, base, az_range, placed):
    for _ in range(1000):
        az = math.radians(rng.uniform(*az_range))
        rho = rng.uniform(0.07, 0.10)
        h = rng.uniform(0.18, 0.38)
        c = [base[0] + rho * math.cos(az), base[1] + rho * math.sin(az), h]
        if all(math.dist(c, p) >= 0.065 for p in placed):
            break
    else:
        raise RuntimeError("could not place part " + pid)
    placed.append(c)
    tilt = math.radians(30)
    normal = [math.cos(tilt) * math.cos(az), math.cos(tilt) * math.sin(az), math.sin(tilt)]
    return {
        "id": pid,
        "kind": kind,
        "center": [round(v, 4) for v in c],
        "radius": round(rng.uniform(0.022, 0.028), 4),
        "normal": [round(v, 4) for v in normal],
        "color": COLORS[kind],
    }


def make_plant(rng, pid, bed, x, layout):
    sign = -1.0 if bed == "A" else 1.0
    base = (x, sign * BED_Y)
    # Side A is worked outbound (+x), side B on the way back (-x); the near
    # side is the flank met first.
    near_x = x - APPROACH_DX if bed == "A" else x + APPROACH_DX
    far_x = x + APPROACH_DX if bed == "A" else x - APPROACH_DX
    near = (near_x, sign * APPROACH_Y)
    far = (far_x, sign * APPROACH_Y)
    facing = 90.0 if bed == "A" else -90.0
    # Positive azimuth offsets from the hallway-facing direction point at the
    # near flank for both beds.
    toward_near = 1.0
    near_range = sorted([facing + toward_near * 10, facing + toward_near * 75])
    far_range = sorted([facing - toward_near * 10, facing - toward_near * 75])
    parts = []
    placed = []
    n = 0
    for half, kinds in layout:
        rng_az = near_range if half == "near" else far_range
        for kind in kinds:
            n += 1
            parts.append(make_part(rng, f"{pid}-{kind[0]}{n}", kind, base, rng_az, placed))
    return {
        "id": pid,
        "bed": bed,
        "base": {"x": base[0], "y": base[1], "theta": 0.0},
        "stem": {"radius": 0.03, "height": STEM_HEIGHT},
        "near_side": {"x": near[0], "y": near[1], "theta": round(heading(near, base), 6)},
        "far_side": {"x": far[0], "y": far[1], "theta": round(heading(far, base), 6)},
        "footprint_radius": 0.2,
        "parts": parts,
    }


def default_scenario():
    rng = random.Random(2024)
    layouts = [
        [("near", ["unhealthy", "flower", "flower", "healthy"]), ("far", ["unhealthy", "flower", "healthy", "healthy"])],
        [("near", ["unhealthy", "flower", "healthy"]), ("far", ["unhealthy", "flower", "flower", "healthy"])],
        [("near", ["unhealthy", "unhealthy", "flower", "healthy"]), ("far", ["flower", "flower", "healthy"])],
    ]
    plants = []
    for bed in ("A", "B"):
        for i, x in enumerate((0.75, 1.5, 2.25)):
            plants.append(make_plant(rng, f"{bed}{i + 1}", bed, x, layouts[(i + (bed == "B")) % 3]))
    return {
        "seed": 7,
        "timestep": 0.01,
        "arena": {
            "hallway_length": 3.0,
            "hallway_width": 0.8,
            "bounds": {"x_min": -0.6, "x_max": 3.6, "y_min": -1.0, "y_max": 1.0},
            "start_area": {"x_min": -0.5, "x_max": -0.1, "y_min": -0.2, "y_max": 0.2},
            "end_area": {"x_min": -0.5, "x_max": -0.1, "y_min": 0.25, "y_max": 0.65},
            "intersection": {"x": 0.2, "y": 0.0, "theta": -0.6},
            "far_end": {"x": 2.8, "y": 0.0, "theta": -0.6},
            "end_pose": {"x": -0.3, "y": 0.45, "theta": 0.0},
            "backdrop": [70, 55, 45],
        },
        "plants": plants,
    }


def minimal_scenario():
    rng = random.Random(1)
    doc = default_scenario()
    doc["plants"] = [make_plant(rng, "A1", "A", 0.75, [("near", ["unhealthy"])])]
    return doc


def main():
    ROOT.mkdir(exist_ok=True)
    for name, doc in (("default.json", default_scenario()), ("minimal.json", minimal_scenario())):
        (ROOT / name).write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
