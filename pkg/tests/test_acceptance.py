"""Acceptance gate: one test per criterion, at the pinned tolerances.

Criterion 1/2 share the full kappa sweep of configs/acceptance.ini
(session fixture).  Each test prints a PASS line on success so the gate
reads as a checklist under `pytest -v -s tests/test_acceptance.py`.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from support import ManufacturedFull, ManufacturedLimit, observed_order, paired_trajectory

from nsmlimit.diagnostics import energy_identity_audit
from nsmlimit.harness import parse_config, run_sweep
from nsmlimit.initdata import WellPreparedSpec, make_limit_data, make_well_prepared
from nsmlimit.integrator import StepControl, evolve
from nsmlimit.model import Params, random_two_fluid_state, reformulation_check
from nsmlimit.spectral import Grid, moser_ensemble

REPO_ROOT = Path(__file__).resolve().parent.parent
ACCEPTANCE_CONFIG = REPO_ROOT / "configs" / "acceptance.ini"


@pytest.fixture(scope="session")
def acceptance_cfg():
    return parse_config(ACCEPTANCE_CONFIG)


@pytest.fixture(scope="session")
def sweep_result(acceptance_cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_sweep")
    return run_sweep(acceptance_cfg, out_dir=out)


def _report(name: str, detail: str):
    print(f"ACCEPTANCE {name}: PASS ({detail})")


def test_c1_convergence_rate(sweep_result):
    """Fitted log-log slope of sup_t sqrt(Gamma) vs kappa in [0.8, 1.3], r2 >= 0.98."""
    s = sweep_result.summary
    assert s["kappa"] == [0.4, 0.2, 0.1, 0.05]
    assert 0.8 <= s["slope"] <= 1.3, s
    assert s["r2"] >= 0.98, s
    _report("1 convergence rate", f"slope={s['slope']:.4f}, r2={s['r2']:.6f}")


def test_c2_uniform_bound(sweep_result):
    """sup_t Gamma/kappa^2 varies by less than a factor 2 across the sweep."""
    ratios = [rec.sup_gamma() / rec.kappa**2 for rec in sweep_result.records]
    spread = max(ratios) / min(ratios)
    assert spread < 2.0, ratios
    _report("2 uniform bound", f"sup Gamma/kappa^2 spread = {spread:.3f}")


def test_c3_reformulation_certificate(acceptance_cfg):
    """Recast/scaling residuals <= 1e-9 on 10 seeded band-limited states."""
    grid = acceptance_cfg.grid
    p = acceptance_cfg.params
    worst = 0.0
    for seed in range(10):
        state = random_two_fluid_state(grid, p, seed=seed)
        worst = max(worst, reformulation_check(state, p).max_residual)
    assert worst <= 1e-9, worst
    _report("3 reformulation certificate", f"worst residual = {worst:.3e}")


def test_c4_constraints_and_conservation(sweep_result):
    """divE, divB <= 1e-10 (normalized) and mass drift <= 1e-10 at every
    recorded step of every sweep run."""
    worst_div = 0.0
    worst_mass = 0.0
    for rec in sweep_result.records:
        assert rec.status == "completed"
        for row in rec.rows:
            worst_div = max(worst_div, row.divE, row.divB)
            worst_mass = max(worst_mass, row.mass_err)
    assert worst_div <= 1e-10, worst_div
    assert worst_mass <= 1e-10, worst_mass
    _report(
        "4 constraints/conservation",
        f"max normalized div = {worst_div:.2e}, max mass drift = {worst_mass:.2e}",
    )


def test_c5_energy_identity_audit():
    """Audit residual shrinks >= 3.5x under dt-halving; deleting one
    right-hand term raises it >= 10x."""
    grid = Grid(1, 64)
    residuals = []
    for dt in (4e-3, 2e-3):
        snaps, p = paired_trajectory(grid, kappa=0.05, dt=dt, n_steps=8)
        residuals.append(energy_identity_audit(snaps, p).max_residual)
    shrink = residuals[0] / residuals[1]
    assert shrink >= 3.5, residuals

    snaps, p = paired_trajectory(grid, kappa=0.05, dt=4e-3, n_steps=8)
    base = energy_identity_audit(snaps, p).max_residual
    injected = energy_identity_audit(snaps, p, drop_term=1).max_residual
    jump = injected / base
    assert jump >= 10.0, (base, injected)
    _report("5 energy-identity audit", f"halving shrink x{shrink:.2f}, fault jump x{jump:.0f}")


def test_c6_moser_suite():
    """Uniform empirical constants over 100 pairs at s=4 grow < 5% when the
    resolution doubles from 64 to 128."""
    c1, c2 = moser_ensemble(Grid(1, 64), s=4, n_pairs=100, seed=0)
    f1, f2 = moser_ensemble(Grid(1, 128), s=4, n_pairs=100, seed=0)
    g1 = abs(f1 / c1 - 1.0)
    g2 = abs(f2 / c2 - 1.0)
    assert g1 < 0.05 and g2 < 0.05, (c1, f1, c2, f2)
    _report(
        "6 product/commutator inequalities",
        f"constants ({c1:.3f}, {c2:.3f}), growth ({100*g1:.3f}%, {100*g2:.3f}%)",
    )


def test_c7_order_and_kappa_robustness():
    """Manufactured-solution orders in [1.8, 2.2] for both steppers; fixed
    grid/dt runs at kappa in {1, 0.1, 0.01} all complete."""
    grid = Grid(1, 64)
    mms_full = ManufacturedFull(grid, Params(kappa=1.0))
    errs_full = [mms_full.error_after(dt, t_end=3.2e-2) for dt in (4e-3, 2e-3, 1e-3)]
    p_full = observed_order(errs_full)
    assert 1.8 <= p_full <= 2.2, errs_full

    mms_limit = ManufacturedLimit(grid, Params(kappa=0.5))
    errs_limit = [mms_limit.error_after(dt, t_end=3.2e-2) for dt in (4e-3, 2e-3, 1e-3)]
    p_limit = observed_order(errs_limit)
    assert 1.8 <= p_limit <= 2.2, errs_limit

    sc = StepControl(dt=2e-4, t_end=0.1)
    for kap in (1.0, 0.1, 0.01):
        p = Params(kappa=kap)
        base = make_limit_data(grid, seed=7, amplitude=0.1)
        state = make_well_prepared(WellPreparedSpec.from_seed(base, 7, 1.0, kap))
        final, log = evolve(state, p, sc)
        assert log.status == "completed", (kap, log.message)
        assert np.isfinite(final.n.values).all()
    _report(
        "7 order/asymptotic robustness",
        f"orders full={p_full:.2f}, limit={p_limit:.2f}; kappa in {{1,0.1,0.01}} stable",
    )


def test_c8_sweep_determinism(tmp_path):
    """Repeated sweeps with an identical config produce byte-identical CSV
    and JSON outputs."""
    text = """\
[grid]
dims_active = 1
points_per_dim = 64

[step]
dt = 2e-4
t_end = 0.02

[sweep]
kappa_list = 0.4, 0.2, 0.1

[diagnostics]
snapshot_stride = 20
"""
    from nsmlimit.harness import parse_config_text

    cfg = parse_config_text(text)
    out1 = tmp_path / "first"
    out2 = tmp_path / "second"
    run_sweep(cfg, out_dir=out1)
    run_sweep(cfg, out_dir=out2)
    names_csv = sorted(p.name for p in out1.glob("*.csv"))
    names_json = sorted(p.name for p in out1.glob("*.json"))
    assert names_csv and names_json
    compared = 0
    for name in names_csv + names_json:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
        compared += 1
    _report("8 determinism", f"{compared} CSV/JSON files byte-identical")
