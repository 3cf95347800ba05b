#!/usr/bin/env python3
"""Smoke test for the tvqp_py extension module.

Builds the cdylib if needed, loads it, and exercises the main entry points
against hand-checked values. Exits nonzero on any failure.
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    lib = REPO / "target" / "debug" / "libtvqp_py.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "-p", "tvqp-py"], cwd=REPO, check=True
        )
    staging = Path(tempfile.mkdtemp(prefix="tvqp_py_"))
    shutil.copy(lib, staging / "tvqp_py.so")
    sys.path.insert(0, str(staging))
    import tvqp_py

    return tvqp_py


def main():
    m = load_module()

    # nonconvex aggregate built from asynchronous samples
    top, bottom = m.nonconvex_demo_eigenvalues()
    assert abs(top - 1.77) <= 0.01, top
    assert abs(bottom - (-0.08)) <= 0.01, bottom
    mat = m.nonconvex_demo_matrix()
    assert abs(mat[0][0] - (1.2 - math.sqrt(2) / 2)) < 1e-12
    assert abs(mat[1][0] - (-1.0)) < 1e-12
    print(f"PASS nonconvex demo: eigenvalues {top:.4f}, {bottom:.4f}")

    # eigenvalues of a skew matrix's symmetric part vanish
    eigs = m.symmetric_part_eigs([[0.0, 1.0], [-1.0, 0.0]])
    assert all(abs(e) < 1e-12 for e in eigs)
    print("PASS symmetric-part eigenvalues")

    # box QP: unconstrained minimum (2, 0) clamps to (1, 0)
    x, value = m.solve_box_qp(
        [[1.0, 0.0], [0.0, 1.0]], [-2.0, 0.0], [0.0, 0.0], [1.0, 1.0]
    )
    assert abs(x[0] - 1.0) < 1e-8 and abs(x[1]) < 1e-8, x
    assert abs(value - (-1.5)) < 1e-8, value
    print(f"PASS box QP solve: x = {x}, value = {value:.6f}")

    # exact L2 distance: d(x) = x on [0, 1] integrates to 1/3
    d = m.l2_distance_squared(
        [[0.0]], [1.0], 0.0, [[0.0]], [0.0], 0.0, [0.0], [1.0]
    )
    assert abs(d - 1.0 / 3.0) < 1e-14, d
    print(f"PASS L2 distance: {d:.12f} == 1/3")

    # geometric constant at n=2 with Gamma(1) = 1
    v = m.k1(2, 0.25, 0.5, math.sqrt(2), 0.2)
    expect = 0.04 * math.pi * 0.25 * 0.125 / 64.0
    assert abs(v - expect) < 1e-15, v
    # n=2, u=phi=1, K1=1, l2=1 gives 4^{1/4} = sqrt(2)
    b = m.argmin_distance_bound(1.0, 1.0, 2, 1.0, 1.0)
    assert abs(b - math.sqrt(2)) < 1e-12, b
    print("PASS bound constants")

    # generated schedules always satisfy the delay bound
    violations = m.check_schedule(11, 3, 4, [40, 40], 0.4, 0.4)
    assert violations == [], violations
    print("PASS schedule validation")

    # config-driven run: deterministic and oracle-backed
    cfg = Path(tempfile.mkdtemp(prefix="tvqp_cfg_")) / "smoke.cfg"
    cfg.write_text(
        "[problem]\n"
        "family = modulated\n"
        "agents = 2\n"
        "block_size = 1\n"
        "box_lo = -10\n"
        "box_hi = 10\n"
        "q0 = diag:3,3\n"
        "cos_amp = identity:0.5\n"
        "omega = 0.4\n"
        "r0 = const:5\n"
        "r_freq = 2\n"
        "\n"
        "[schedule]\n"
        "t_s = 1\n"
        "horizon = 6\n"
        "p_sample = 0.5\n"
        "p_update = 0.6\n"
        "p_comm = 0.6\n"
        "B = 3\n"
        "kappa = 50\n"
        "\n"
        "[run]\n"
        "seed = 5\n"
        "gamma = 0.02\n"
        "x0 = random\n"
    )
    r1 = m.run_experiment(str(cfg))
    r2 = m.run_experiment(str(cfg))
    assert r1.rms_error is not None and r1.rms_error > 0.0
    assert r1.rms_error == r2.rms_error
    assert r1.cost == r2.cost
    assert len(r1.k) == len(r1.cost) == len(r1.alpha)
    # a different seed changes the run
    r3 = m.run_experiment(str(cfg), seed=99)
    assert r3.cost != r1.cost
    print(
        f"PASS experiment run: {len(r1.k)} rows, rms_error = {r1.rms_error:.4f}, "
        f"deterministic across reruns"
    )

    print("all smoke tests passed")


if __name__ == "__main__":
    main()
