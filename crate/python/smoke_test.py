"""Smoke test for the `estc` extension module.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python3 python/smoke_test.py
"""

import math
import os
import tempfile

import estc


def check(cond, what):
    if not cond:
        raise AssertionError(what)
    print(f"ok  {what}")


def main():
    check(estc.point_of(0) == (0, 0, 0, 0), "origin has index 0")
    check(estc.index_of((0, 0, 2, 2)) == 68, "index of (0,0,2,2)")
    check(all(estc.index_of(estc.point_of(i)) == i for i in range(5000)), "index round trip")
    try:
        estc.index_of((1, 0, 0, 0))
        check(False, "odd point rejected")
    except ValueError:
        check(True, "odd point rejected")

    counts = [n for _, n in estc.stage_counts()]
    check(counts == [8, 6, 14, 14, 30, 30, 150, 150, 910, 910], "stage counts")
    check(len(estc.model_equations(p=1)) == 998, "1-model has 998 equations")

    field = estc.FieldConfig.from_json(
        '{"omega": 0.7, "q": [0.1, 0.05, 0.2], "q4": 0.37,'
        ' "standing_wave_preset": {"amplitudes": [[0.05, 0.0], [0.03, 0.01], [0.0, 0.04]]}}'
    )
    sol = estc.solve(field, p=1)
    check(sol.equation_count() == 998, "solved the 1-model")
    check(sol.cluster_stats()["final_clusters"] == 284, "284 final clusters")
    report = sol.verify_projectors()
    check(report["max_idempotency_defect"] <= 1e-9, "projectors are idempotent")
    check(report["max_pair_overlap"] <= 1e-9, "projectors are mutually orthogonal")
    check(sol.max_residual_on_model() <= 1e-8, "exact on the model sites")

    table = sol.table
    ud = table.u_d()
    ud2 = table.u_d_from_residuals()
    diff = math.sqrt(sum(abs(ud[i][j] - ud2[i][j]) ** 2 for i in range(4) for j in range(4)))
    norm = math.sqrt(sum(abs(ud[i][j]) ** 2 for i in range(4) for j in range(4)))
    check(diff <= 1e-8 * norm, "U_D agrees between both assemblies")

    a0, r_min, rank = table.best_amplitude()
    check(rank == 4 and r_min >= 0.0, "best amplitude found")
    check(abs(table.accuracy(a0) - r_min) <= 1e-9 * max(1.0, r_min), "R(best) = R_min")
    scaled = [z * (2 - 3j) for z in a0]
    check(abs(table.accuracy(scaled) - r_min) <= 1e-12 * max(1.0, r_min), "R is scale invariant")
    check(table.accuracy([1, 0, 0, 0]) >= r_min, "R_min is a lower bound")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "s.estc")
        table.save(path)
        again = estc.SolutionTable.load(path)
        check(len(again) == len(table) and again.u_e() == table.u_e(), "solution file round trip")

    free = estc.FieldConfig((0.0, 0.0, 0.04), math.sqrt(1 + 0.04**2), 1.0)
    try:
        estc.solve(free, p=0)
        check(False, "on-shell origin is rank deficient")
    except estc.RankDeficiencyError:
        check(True, "on-shell origin is rank deficient")
    _, r_free, rank_free = estc.solve(free, p=0, allow_rank_deficient=True).table.best_amplitude()
    check(r_free <= 1e-10 and rank_free == 2, "free-space limit reaches R_min = 0")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
