"""Smoke test for the tvdeblur extension module.

Build and run from the repository root:

    cargo build -p tvdeblur-python --features extension-module --release
    cp target/release/libtvdeblur.so python/tvdeblur.so
    python3 python/smoke_test.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import tvdeblur  # noqa: E402


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}".rstrip())
    return ok


def main():
    results = []
    psf = tvdeblur.Psf.gaussian(7, 1.5)
    results.append(check("psf mass", abs(psf.mass() - 1.0) < 1e-12, repr(psf)))

    truth = tvdeblur.builtin_image("cartoon", 96, 96)
    f, fov = tvdeblur.simulate(truth, psf, 1e-4, seed=3)
    crop = truth[fov["top"]:fov["top"] + fov["rows"], fov["left"]:fov["left"] + fov["cols"]]
    results.append(check("simulate shape", f.shape == (84, 84), str(fov)))

    raw = tvdeblur.snr(f, crop)
    u, trace = tvdeblur.solve(f, psf, "antireflective", 500.0)
    gain = tvdeblur.snr(u, crop)
    results.append(check("restoration gain", gain > raw, f"{raw:.2f} -> {gain:.2f} dB"))
    results.append(check("trace monotone", trace["monotonicity_violations"] == 0,
                         f"{trace['iterations']} iterations"))

    motion = tvdeblur.Psf.motion(5, 30.0)
    try:
        tvdeblur.solve(f, motion, "reflective", 500.0)
        results.append(check("symmetry error", False))
    except ValueError as e:
        results.append(check("symmetry error", "enlarge" in str(e)))
    u2, _ = tvdeblur.solve_enlarged(f, motion, "reflective", 8, 500.0)
    results.append(check("enlarged solve", u2.shape == f.shape and np.isfinite(u2).all()))

    rng = np.random.default_rng(0)
    b = rng.standard_normal((8, 8))
    for bc in ["zero", "periodic", "reflective", "antireflective"]:
        plan = tvdeblur.SystemPlan(tvdeblur.Psf.gaussian(3, 1.0), (8, 8), bc, 0.5)
        x = plan.solve(b)
        m = tvdeblur.dense_system(tvdeblur.Psf.gaussian(3, 1.0), (8, 8), bc, 0.5)
        dev = np.abs(m @ x.ravel() - b.ravel()).max()
        results.append(check(f"plan vs dense {bc}", dev < 1e-8, f"{dev:.1e}"))

    z1, z2 = tvdeblur.gradient(b, "periodic")
    w1, w2 = rng.standard_normal((8, 8)), rng.standard_normal((8, 8))
    lhs = (z1 * w1).sum() + (z2 * w2).sum()
    rhs = (b * tvdeblur.adjoint_gradient(w1, w2, "periodic")).sum()
    results.append(check("adjoint pairing", abs(lhs - rhs) < 1e-10))

    s1, s2 = tvdeblur.shrink(z1, z2, 2.0)
    results.append(check("shrink", (np.hypot(s1, s2) <= np.hypot(z1, z2) + 1e-15).all()))
    e = tvdeblur.energy(b, z1, z2, b, tvdeblur.Psf.delta(), "periodic", 1.0, 4.0)
    results.append(check("energy", abs(e[2]) < 1e-12 and abs(e[3] - e[1]) < 1e-12))

    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
