"""Smoke test for the mase_py extension.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`
or `maturin build -m crates/py/Cargo.toml` followed by `pip install`.
"""

import json
import pathlib

import mase_py

CASES = pathlib.Path(__file__).resolve().parent.parent / "cases"


def main():
    net = mase_py.Network.from_file(str(CASES / "case14.m"))
    assert (net.n_bus, net.n_branch) == (14, 20)

    ms = mase_py.Measurements.generate(net, seed=3)
    assert len(ms) == 3 * 14 + 4 * 20
    again = mase_py.Measurements.from_json(net, ms.to_json())
    assert again.to_csv() == ms.to_csv()

    part = mase_py.Partition.auto(net, 3, seed=1)
    assert part.k == 3 and len(part.area_of_bus) == 14

    central = mase_py.solve_centralized(net, ms)
    multi = mase_py.solve_multiarea(net, ms, part)
    assert central.converged and multi.converged
    assert multi.boundary_dim == part.n_gamma(net)
    gap = max(abs(a - b) for a, b in zip(central.vm + central.va, multi.vm + multi.va))
    assert gap < 1e-9, gap
    assert abs(central.objective - multi.objective) <= 1e-10 * central.objective
    report = json.loads(multi.report_json())
    assert report["iterations"] == multi.iterations

    vm, va = net.truth()
    exact = mase_py.Measurements.generate(net, noise_scale=0.0)
    assert exact.objective(net, vm, va) == 0.0

    masked = ms.mask("Pf")
    assert masked.active_count == len(ms) - net.n_branch
    rows = json.loads(mase_py.mask_table(net, ms, part))
    assert [r["family"] for r in rows] == ["None", "Pf", "Pt", "Qf", "Qt"]

    big = mase_py.Network.synthetic(120, seed=5)
    sweep = json.loads(mase_py.sweep_k(big, mase_py.Measurements.generate(big), [1, 2, 4], repeats=2))
    assert sweep[0]["boundary_dim"] == 0
    assert all(0.0 <= r["coordinator_share"] <= 1.0 for r in sweep)

    try:
        mase_py.Partition.auto(net, 99)
    except ValueError:
        pass
    else:
        raise AssertionError("infeasible k accepted")

    print("mase_py smoke test passed:", central, multi)


if __name__ == "__main__":
    main()
