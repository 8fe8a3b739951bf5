#!/usr/bin/env python3
"""Generates data/phantom_default.json: an S-curved channel with one narrow downward bend.

Walls are offsets of a centerline built from straight and arc pieces; sensor windows are
given as wall-segment index ranges so they lie on the walls by construction.
"""
import json
import math
import sys

DS = 0.003
FUNNEL = 0.012          # flared inlet length ahead of x = 0
HALF_WIDTH = 0.011
FUNNEL_HALF_WIDTH = 0.020
BEND_HALF_WIDTH = 0.0095

# (kind, length or angle, radius)
PIECES = [
    ("straight", 0.020, None),
    ("arc", math.radians(20.0), 0.060),
    ("arc", math.radians(-20.0), 0.060),
    ("straight", 0.015, None),
    ("arc", math.radians(-90.0), 0.040),
    ("straight", 0.090, None),
]
WINDOWS = {  # arc-length ranges along the centerline (m), measured from x = 0
    "nostril": (-FUNNEL, 0.010),
    "nasal_cavity": (0.022, 0.062),
    "throat": (0.080, 0.175),
}
TARGET_S = 0.190


def centerline():
    pts = [(-FUNNEL, 0.0, 0.0, -FUNNEL)]  # x, z, heading, s
    x, z, h, s = 0.0, 0.0, 0.0, 0.0
    n_funnel = round(FUNNEL / DS)
    pts = [(-FUNNEL + i * FUNNEL / n_funnel, 0.0, 0.0, -FUNNEL + i * FUNNEL / n_funnel)
           for i in range(n_funnel)]
    pts.append((x, z, h, s))
    for kind, amount, radius in PIECES:
        if kind == "straight":
            n = max(1, round(amount / DS))
            for i in range(1, n + 1):
                d = amount * i / n
                pts.append((x + d * math.cos(h), z + d * math.sin(h), h, s + d))
            x, z, s = x + amount * math.cos(h), z + amount * math.sin(h), s + amount
        else:
            length = abs(amount) * radius
            n = max(1, round(length / DS))
            sign = 1.0 if amount > 0 else -1.0
            cx = x - sign * radius * math.sin(h)
            cz = z + sign * radius * math.cos(h)
            for i in range(1, n + 1):
                hh = h + amount * i / n
                pts.append((cx + sign * radius * math.sin(hh), cz - sign * radius * math.cos(hh),
                            hh, s + length * i / n))
            h += amount
            x, z, s = pts[-1][0], pts[-1][1], s + length
    return pts


def half_width(s):
    if s < 0.0:
        t = (s + FUNNEL) / FUNNEL
        return FUNNEL_HALF_WIDTH + (HALF_WIDTH - FUNNEL_HALF_WIDTH) * t
    bend_start = 0.020 + 2 * math.radians(20.0) * 0.060 + 0.015
    bend_end = bend_start + math.radians(90.0) * 0.040
    ramp = 0.012
    if s < bend_start - ramp or s > bend_end + ramp:
        return HALF_WIDTH
    if s < bend_start:
        t = (s - (bend_start - ramp)) / ramp
    elif s > bend_end:
        t = 1.0 - (s - bend_end) / ramp
    else:
        t = 1.0
    return HALF_WIDTH + (BEND_HALF_WIDTH - HALF_WIDTH) * t


def r6(v):
    return round(v, 6)


def main(out_path):
    cl = centerline()
    upper, lower, svals = [], [], []
    for x, z, h, s in cl:
        w = half_width(s)
        nx, nz = -math.sin(h), math.cos(h)  # left of heading
        upper.append([r6(x + w * nx), r6(z + w * nz)])
        lower.append([r6(x - w * nx), r6(z - w * nz)])
        svals.append(s)
    segs = len(cl) - 1

    def seg_range(lo, hi):
        idx = [i for i in range(segs) if svals[i] >= lo - 1e-9 and svals[i + 1] <= hi + 1e-9]
        return [idx[0], idx[-1]]

    windows = {}
    for name, (lo, hi) in WINDOWS.items():
        r = seg_range(lo, hi)
        windows[name] = [{"wall": "upper", "segments": r}, {"wall": "lower", "segments": r}]

    k = min(range(len(svals)), key=lambda i: abs(svals[i] - TARGET_S))
    doc = {
        "format_version": 1,
        "units": "m",
        "description": "S-curved channel, narrow downward bend between nasal-cavity and throat windows",
        "inlet_x": 0.0,
        "centerline": [[r6(p[0]), r6(p[1])] for p in cl],
        "upper_wall": upper,
        "lower_wall": lower,
        "sensor_windows": windows,
        "target": {"a": lower[k], "b": upper[k]},
    }
    with open(out_path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/phantom_default.json")
