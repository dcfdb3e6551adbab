#!/usr/bin/env python3
"""Smoke test for the _thinlab extension module.

Builds the cdylib with cargo, loads it, and exercises the main types and
operations end to end. Run from the repository root:

    python3 python/smoke_test.py [--release]
"""

import argparse
import importlib.util
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build_and_import(release: bool):
    cmd = ["cargo", "build", "-p", "thinlab-py"]
    profile = "debug"
    if release:
        cmd.append("--release")
        profile = "release"
    subprocess.run(cmd, cwd=ROOT, check=True)
    built = ROOT / "target" / profile / "lib_thinlab.so"
    if not built.exists():  # e.g. macOS
        built = ROOT / "target" / profile / "lib_thinlab.dylib"
    staging = pathlib.Path(tempfile.mkdtemp(prefix="thinlab_py_"))
    target = staging / "_thinlab.so"
    shutil.copy2(built, target)
    spec = importlib.util.spec_from_file_location("_thinlab", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def approx(a, b, rel=1e-12):
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--release", action="store_true")
    args = parser.parse_args()

    tl = build_and_import(args.release)
    checks = 0

    def check(name, ok):
        nonlocal checks
        checks += 1
        status = "ok" if ok else "FAIL"
        print(f"  [{status}] {name}")
        if not ok:
            sys.exit(1)

    # closed-form pieces
    check("quality correction 1 + b(1-p)", approx(tl.quality_correction(0.5, 0.5), 1.25))
    check("strip road survival p = s/a", approx(tl.survival_after_strip_roads(0.6, 0.8), 0.75))
    check("bare land sensitivity", approx(tl.bare_land_sensitivity(1000.0, 1000.0), 0.5))

    # fixtures round-trip through the bindings
    kernel = tl.GrowthKernel.load(str(ROOT / "crates/thinlab/fixtures/config/kernel.json"))
    market = tl.MarketModel.load(str(ROOT / "crates/thinlab/fixtures/config/market.json"))
    stand = tl.Stand.load(str(ROOT / "crates/thinlab/fixtures/stands/stand_01.csv"))
    check("fixture stand loads", stand.total_stems() > 1000)
    check("basal area positive", stand.basal_area() > 10.0)

    grown = stand.grow_step(kernel, False)
    check("growth step ages the stand", grown.age_months == stand.age_months + tl.STEP_MONTHS)
    check(
        "growth moves the mean diameter",
        grown.ba_weighted_mean_diameter() > stand.ba_weighted_mean_diameter(),
    )

    # valuation basics
    vp, vs = market.assortment_volumes("spruce", 250.0)
    check("sawlog share above threshold", vs > vp)
    check(
        "quality enters through the sawlog price only",
        approx(
            market.tree_roadside_value("spruce", 250.0, 1.2) - market.tree_roadside_value("spruce", 250.0, 1.0),
            0.2 * vs * 58.0,
        ),
    )
    t1 = market.harvest_time_per_m3("pine", 0.1)
    t2 = market.harvest_time_per_m3("pine", 0.2)
    check("harvest time power law", approx(t2 / t1, 2.0 ** (-2.0 / 3.0)))

    # one simulated rotation
    schedule = {
        "rotation_steps": 8,
        "events": [
            {
                "step": 2,
                "retention": [1.0] * 8 + [0.3] * 12,
                "strip_road_survival": 0.85,
                "quality": True,
                "quality_half_width": 0.5,
            }
        ],
    }
    sim = tl.simulate(stand, kernel, market, json.dumps(schedule), mode="quality")
    check("simulate returns a finite rate", math.isfinite(sim["expected_return_rate"]))
    check("trajectory has one row per node", len(sim["trajectory"]) == 9)
    check("trace has one row per step", len(sim["trace"]) == 8)
    terminal = sim["terminal_stand"]
    elevated = [row for row in terminal.cohorts() if row[3] > 1.0 + 1e-9]
    check("quality thinning elevates retained multipliers", len(elevated) > 0)

    # regimes never lose to the no-quality baseline
    small = dict(min_rotation_steps=4, max_rotation_steps=6, max_thinnings=1, min_searchable_stems=200.0)
    none_result = tl.optimize_schedule(stand, kernel, market, mode="none", **small)
    quality_result = tl.optimize_schedule(stand, kernel, market, mode="quality", **small)
    check("optimizer runs", none_result["evaluations"] > 0)
    check("quality regime >= none regime", quality_result["best_r"] >= none_result["best_r"])

    # profile exposes the two-peak structure
    profile = tl.value_increment_profile(stand, kernel, market)
    rates = [r for (_, r) in profile["spruce"]]
    check("profile rates are finite", all(math.isfinite(r) for r in rates))

    stands = tl.generate_stands(7, 2)
    check("generated stands are spruce dominated", stands[0].total_stems() > 800)

    print(f"all {checks} smoke checks passed")


if __name__ == "__main__":
    main()
