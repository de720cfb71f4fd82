"""Acceptance criteria, one test per criterion, each backed by checks of the standard suite.

Every test asserts that the suite checks it relies on use exactly the stated
tolerance, then that they pass, and prints a single PASS/FAIL line.
Run directly (``python3 tests/test_acceptance.py``) for just the ten lines.
"""

import sys

import pytest

from dampreg.verify import DEFAULT_SEED, run_suite, select, standard_suite

CRITERIA = {
    1: ("algebraic identities", {
        "algebra.lc_matrix_orthogonality": 1e-13,
        "algebra.ks_matrix_orthogonality": 1e-13,
        "algebra.uhat_scaling": 1e-13,
        "algebra.permutation_orthonormality": 1e-13,
        "algebra.permutation_commutation": 1e-15,
    }),
    2: ("LC round trip", {f"roundtrip.lc.lambda={lam}": 1e-6 for lam in (0.0, 0.01, 0.1)}),
    3: ("power-law round trip", {
        **{f"roundtrip.genlc.N={n}": 1e-6 for n in range(4)},
        "limit.genlc_n1_equals_lc": 1e-12,
    }),
    4: ("K-S round trip", {
        "roundtrip.ks.lambda=0.01": 1e-6,
        "roundtrip.ks.damped_original": 1e-6,
        "conservation.ks_bilinear": 1e-10,
    }),
    5: ("collision passage", {"collision.lc_2d": 1e-6, "collision.ks_3d": 1e-6}),
    6: ("conservation", {
        **{f"conservation.{n}": 1e-9 for n in (
            "kepler_2d", "power_law_2d.N=1", "power_law_2d.N=2", "power_law_2d.N=3", "kepler_3d", "damped_kepler_2d")},
        **{f"conservation.script_e_cross_coords.{f}": 1e-10 for f in ("LC", "GenLC", "KS")},
    }),
    7: ("zero-damping reductions", {
        "limit.lc_field_is_sho": 1e-13,
        "limit.ks_field_is_sho": 1e-13,
        "limit.lc_kepler_ellipse": 1e-6,
        "limit.ks_kepler_ellipse": 1e-6,
    }),
    8: ("homogeneous Hamiltonian equivalence", {
        "hamiltonian.sextic_constancy": 1e-9,
        "hamiltonian.homogeneous_4k": 1e-8,
    }),
    9: ("Bohlin chain", {"bohlin.kepler_energy": 1e-8, "bohlin.strength_identification": 1e-8}),
    # |ratio - 16| <= 4 is the same as a ratio in [12, 20]
    10: ("RK4 order", {"integrator.rk4_order": 4.0}),
}

ROUNDTRIP_INTEGRATOR_TOL = 1e-12


def evaluate(number, entries_by_name=None):
    title, checks = CRITERIA[number]
    suite = {c.name: c for c in standard_suite()}
    missing = [n for n in checks if n not in suite]
    if missing:
        return False, f"missing checks {missing}", 0.0
    for name, tol in checks.items():
        if suite[name].tolerance != tol:
            return False, f"{name} runs at {suite[name].tolerance}, not {tol}", 0.0
        if name.startswith("roundtrip.") and suite[name].scenario.get("tol", ROUNDTRIP_INTEGRATOR_TOL) != ROUNDTRIP_INTEGRATOR_TOL:
            return False, f"{name} integrates at the wrong tolerance", 0.0
    if entries_by_name is None:
        entries = run_suite([suite[n] for n in checks], DEFAULT_SEED)
    else:
        entries = [entries_by_name[n] for n in checks]
    seconds = sum(e.seconds for e in entries)
    bad = [f"{e.name}: measured {e.measured} > {e.tolerance}" + (f" ({e.error})" if e.error else "")
           for e in entries if not e.passed]
    if seconds >= 60:
        bad.append(f"took {seconds:.1f} s")
    worst = ", ".join(f"{e.name}={e.measured:.3g}" for e in entries if e.measured is not None)
    return not bad, "; ".join(bad) or worst, seconds


def line(number, ok, msg, seconds):
    return f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {CRITERIA[number][0]} [{seconds:.1f} s]: {msg}"


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, suite_report, capsys):
    ok, msg, seconds = evaluate(number, {n: e for n, (_, e) in suite_report.items()})
    with capsys.disabled():
        print("\n" + line(number, ok, msg, seconds))
    assert ok, msg


def test_criteria_cover_distinct_checks():
    names = [n for _, checks in CRITERIA.values() for n in checks]
    assert len(names) == len(set(names))
    assert set(names) <= {c.name for c in select(standard_suite(), None)}


if __name__ == "__main__":
    results = []
    for k in sorted(CRITERIA):
        ok, msg, seconds = evaluate(k)
        print(line(k, ok, msg, seconds), flush=True)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
