#!/usr/bin/env python3
"""Generate the bundled demo trajectory, corridor, scenarios and invalid fixtures."""

import json
import pathlib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"

# Knots: time, position, velocity, acceleration.
KNOTS = [
    (0.0, (0.0, 0.0, 1.0), (0.0, 0.0, 0.0)),
    (3.0, (2.0, 0.0, 1.0), (1.0, 0.0, 0.0)),
    (7.0, (6.0, 1.0, 1.0), (1.0, 0.0, 0.0)),
    (10.0, (9.0, 1.0, 1.0), (1.0, 0.0, 0.0)),
    (13.0, (10.5, 1.0, 1.0), (0.0, 0.0, 0.0)),
]
SEGMENT_POLY = [0, 1, 2, 2]
TIME_SCALE = 2.0
HALF_WIDTH = 0.3


def quintic_hermite(p0, v0, p1, v1, T):
    """Ascending coefficients of the quintic matching position and velocity at both ends, zero acceleration."""
    M = np.array([
        [1, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 0, 0],
        [0, 0, 2, 0, 0, 0],
        [1, T, T**2, T**3, T**4, T**5],
        [0, 1, 2 * T, 3 * T**2, 4 * T**3, 5 * T**4],
        [0, 0, 2, 6 * T, 12 * T**2, 20 * T**3],
    ], dtype=float)
    return np.linalg.solve(M, np.array([p0, v0, 0.0, p1, v1, 0.0]))


def segments(knots):
    out = []
    for i in range(len(knots) - 1):
        t0, p0, v0 = knots[i]
        t1, p1, v1 = knots[i + 1]
        T = (t1 - t0) * TIME_SCALE
        coeffs = {ax: [round(c, 12) for c in quintic_hermite(p0[k], v0[k] / TIME_SCALE, p1[k], v1[k] / TIME_SCALE, T)]
                  for k, ax in enumerate("xyz")}
        out.append({"duration": T, "corridor_index": SEGMENT_POLY[i], "coeffs": coeffs})
    return out


def face(normal, offset):
    return {"normal": [float(v) for v in normal], "offset": float(offset)}


def box(lo, hi):
    faces = []
    for ax in range(3):
        n = [0.0, 0.0, 0.0]
        n[ax] = 1.0
        faces.append(face(n, hi[ax]))
        n = [0.0, 0.0, 0.0]
        n[ax] = -1.0
        faces.append(face(n, -lo[ax]))
    return {"faces": faces}


def slab(a, b, half_width, x_lo, x_hi, z_lo, z_hi):
    """Band of the given half-width around the xy chord a-b, cut by x and z planes."""
    d = np.array(b, dtype=float) - np.array(a, dtype=float)
    n = np.array([-d[1], d[0]]) / np.linalg.norm(d)
    c = float(n @ np.array(a, dtype=float))
    return {"faces": [
        face((n[0], n[1], 0.0), c + half_width),
        face((-n[0], -n[1], 0.0), -c + half_width),
        face((1.0, 0.0, 0.0), x_hi),
        face((-1.0, 0.0, 0.0), -x_lo),
        face((0.0, 0.0, 1.0), z_hi),
        face((0.0, 0.0, -1.0), -z_lo),
    ]}


def corridor():
    w = HALF_WIDTH
    return {"polyhedra": [
        box((-0.5, -w, 1.0 - w), (2.6, w, 1.0 + w)),
        slab((2.0, 0.0), (6.0, 1.0), w, 1.8, 6.2, 1.0 - w, 1.0 + w),
        box((5.4, 1.0 - w, 1.0 - w), (11.0, 1.0 + w, 1.0 + w)),
    ]}


def evaluate(traj, t):
    for seg in traj["segments"]:
        if t <= seg["duration"] + 1e-12:
            return np.array([np.polyval(seg["coeffs"][ax][::-1], t) for ax in "xyz"]), seg["corridor_index"]
        t -= seg["duration"]
    seg = traj["segments"][-1]
    return np.array([np.polyval(seg["coeffs"][ax][::-1], seg["duration"]) for ax in "xyz"]), seg["corridor_index"]


def clearance(poly, p):
    return min(f["offset"] - np.dot(f["normal"], p) for f in poly["faces"])


def check_inside(traj, corr):
    total = sum(s["duration"] for s in traj["segments"])
    worst = np.inf
    for t in np.linspace(0.0, total, 2001):
        p, i = evaluate(traj, t)
        worst = min(worst, clearance(corr["polyhedra"][i], p))
    assert worst > 0.1, f"reference too close to the corridor boundary: {worst}"
    return worst


MPCC = {
    "N": 20,
    "dt": 0.05,
    "rho": 0.001,
    "terminal_eps": 0.1,
    "limits": {"v_max": [3.0, 3.0, 3.0], "a_max": [6.0, 6.0, 6.0], "j_max": [30.0, 30.0, 30.0],
               "v_t_max": 3.0, "a_t_max": 5.0, "j_t_max": 50.0},
}


def scenario(name, disturbances, duration=20.0, start=(0.0, 0.0, 1.0), traj="../demo_trajectory.json",
             corr="../demo_corridor.json"):
    return {
        "name": name,
        "trajectory": traj,
        "corridor": corr,
        "mpcc": MPCC,
        "start": {"position": list(start), "velocity": [0.0, 0.0, 0.0]},
        "disturbances": disturbances,
        "duration_s": duration,
        "seed": 7,
    }


def write(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def main():
    traj = {"t0": 0.0, "segments": segments(KNOTS)}
    corr = corridor()
    check_inside(traj, corr)
    write(ROOT / "demo_trajectory.json", traj)
    write(ROOT / "demo_corridor.json", corr)

    sc = ROOT / "scenarios"
    write(sc / "nominal.json", scenario("nominal", []))
    write(sc / "impulse.json", scenario("impulse", [
        {"kind": "impulse", "start": 4.0, "duration": 0.05, "accel": [0.0, -10.0, 0.0]}]))
    write(sc / "wind.json", scenario("wind", [
        {"kind": "wind", "start": 2.0, "duration": 4.0, "accel": [0.0, 1.5, 0.0]}]))
    write(sc / "blocking_wind.json", scenario("blocking_wind", [
        {"kind": "wind", "start": 2.0, "duration": 20.0, "accel": [0.0, 40.0, 0.0]}]))
    write(sc / "start_outside.json", scenario("start_outside", [], start=(0.0, 1.0, 1.0)))

    # Gap between polyhedra 1 and 2.
    gap = corridor()
    for f in gap["polyhedra"][2]["faces"]:
        if f["normal"] == [-1.0, 0.0, 0.0]:
            f["offset"] = -6.8
    write(ROOT / "invalid" / "corridor_gap.json", gap)

    # Position jump at joint 1.
    jump = json.loads(json.dumps(traj))
    jump["segments"][2]["coeffs"]["x"][0] += 0.5
    write(ROOT / "invalid" / "trajectory_jump.json", jump)


if __name__ == "__main__":
    main()
