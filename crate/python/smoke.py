"""Smoke test for the edca_sim extension module.

Build the module first:

    cargo build --release -p edca-py

then run ``python3 python/smoke.py``. The script locates the built library,
imports it and exercises the main entry points.
"""

import importlib.util
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libedca_sim.so"
        if lib.exists():
            spec = importlib.util.spec_from_file_location("edca_sim", lib)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("libedca_sim.so not found; run `cargo build --release -p edca-py`")


def main():
    sim = load()

    assert sim.compute_cw(30) == (15, 63)
    assert sim.compute_cw(512) == (255, 1023)
    try:
        sim.compute_cw(0)
    except ValueError:
        pass
    else:
        raise AssertionError("n = 0 must be rejected")
    assert sim.compute_aifsn(True, True, True) == {"VO": 2, "VI": 3, "BE": 4}
    assert sim.compute_aifsn(False, False, False) == {}

    counters = sim.AcCounters()
    be = sim.qos_info_for("BE")
    for _ in range(64):
        counters.associate(be)
    assert counters.count("BE") == 64
    assert counters.activity() == (False, False, True)
    params = counters.param_set()
    assert params.get("BE") == (2, 31, 127)
    assert params.epoch == 1
    assert sim.EdcaParamSet.default_set().get("BK") == (7, 15, 1023)

    grid = sim.paper_grid()
    assert len(grid) == 40
    assert grid[-1].scenario_id == "512BE+15VO+15VI"

    scenario = sim.Scenario.saturated("8BE+2VO", {"BE": 8, "VO": 2}, duration=2.0, warmup=0.5)
    assert sim.Scenario.from_toml(scenario.to_toml()).scenario_id == "8BE+2VO"
    runs = {p: sim.run(scenario, p, 1) for p in ("edca", "qcaaae")}
    for policy, result in runs.items():
        assert result.is_consistent()
        assert result.scopes() == ["BE", "VO", "global"]
        g = result.metrics("global")
        assert g["generated"] == g["delivered"] + g["dropped"] + g["queued"]
        print(f"{policy:>7}: throughput {g['normalized_throughput']:.4f}, "
              f"delay {g['mean_delay_s'] * 1e3:.3f} ms, retx {g['retx_per_frame']:.3f}")
    assert runs["edca"].to_csv() == sim.run(scenario, "edca", 1).to_csv()
    assert runs["edca"].to_csv().splitlines()[0] == sim.CSV_HEADER

    with tempfile.TemporaryDirectory() as out:
        report = sim.sweep(sim.paper_grid(64)[:3], [1, 2], out)
        assert report["failures"] == []
        assert len(report["results_csv"].splitlines()) == 1 + 3 * 2 * 2 * 2
        assert (pathlib.Path(out) / "metadata.json").exists()

    print("smoke test passed")


if __name__ == "__main__":
    main()
