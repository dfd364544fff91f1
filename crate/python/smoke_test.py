"""Smoke test for the pycohom1 extension module.

Build and install first:
    pip install --no-build-isolation ./crates/cohom1-py
then run
    python3 python/smoke_test.py
"""

import math
import sys

import pycohom1 as c


def check(cond, msg):
    if not cond:
        print(f"FAIL {msg}")
        sys.exit(1)
    print(f"ok   {msg}")


def main():
    mp = c.ModelParams(1, 1, 1)
    check(mp.n == 7, "n = 4m + 3")

    for e in c.critical_points(mp):
        check(e["v_inf"] < 1e-12, f"{e['id']} is critical")

    p0 = c.PhasePoint([1, 0, 0, 0, 0, 0, 0, 0])
    v = c.vector_field(p0, mp)
    check(max(abs(x) for x in v.to_list()) == 0.0, "p0 is stationary")
    check(abs(c.derived_scalars(p0, mp)["q"]) < 1e-15, "Q(p0) = 0")

    r = c.run(mp, math.pi / 2, s4=0.0, s5=1.0)
    check((r.label, r.limit_point) == ("AH", "q0"), f"expanding Einstein run is {r!r}")
    last = r.samples()[-1]
    check(abs(last[1] - 1 / 7) < 1e-4 and abs(last[8] - 2 / 7) < 1e-4, "limit at q0")
    s = r.summary()
    check(s["label"] == "AH" and s["drift"]["max_constraint_residual"] < 1e-9, "summary dict")

    steady = c.ModelParams(1, 1, 0)
    r = c.run(steady, math.pi / 2)
    check(r.label == "ALC" and abs(r.nu2 - 0.5) < 1e-3, "Ricci-flat run is ALC at q2")

    t = c.find_theta_star(c.ModelParams(1, 3, 0), tol=1e-10)
    check(0 < t["theta_star"] < math.pi, f"theta* = {t['theta_star']:.10f}")

    a = c.find_alpha(c.ModelParams(0, 3, 0), math.pi, tol=1e-3, audit=False)
    check(a["value"] > 1e-3, f"alpha = {a['value']:.4f}")

    audit = c.boundary_sign_audit(steady, samples=500)
    check(all(s["min"] >= -1e-12 for s in audit["strata"] if s["stratum"] != "k_factor_wide"),
          "boundary audit")

    try:
        c.ModelParams(1, 0, 0)
    except ValueError:
        check(True, "k = 0 rejected")
    else:
        check(False, "k = 0 rejected")
    print("smoke test passed")


if __name__ == "__main__":
    main()
