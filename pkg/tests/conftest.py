"""Prints one PASS/FAIL line per acceptance criterion after the test run."""

ACCEPTANCE_LABELS = {
    "test_c01_gradient_oracle": "C01 gradient oracle (finite differences, 100 nets, <1e-5, <10s)",
    "test_c02_optimizer_oracle": "C02 optimizer oracle (scalar Nesterov recurrence, 10 steps, 1e-12)",
    "test_c03_schedule_tables": "C03 schedule tables (all variants, epochs 0-5000, exact)",
    "test_c04_conformal_validity": "C04 conformal validity (20 seeds, 3-SE floors + R2>0.99, <60s)",
    "test_c05_round_trip": "C05 score/region round trip (1e4 records, boundary <=1e-12)",
    "test_c06_normalization_bound": "C06 normalization bound (max alpha <= max |residual|)",
    "test_c07_forest_oracle": "C07 forest oracle (brute-force splits, >=200 cases, <30s)",
    "test_c08_cross_conformal_accounting": "C08 cross-conformal accounting (100 points, each once)",
    "test_c09_toy_end_to_end": "C09 toy end-to-end (RMSE<0.45, coverage@0.8>=0.77, <5min)",
    "test_c10_determinism": "C10 pipeline determinism (bit-identical validity.csv/widths.csv)",
    "test_c11_binned_error_identity": "C11 binned-error partition identity (<=1e-12)",
    "test_c12_featurizer_contract": "C12 [secondary] featurizer fixture loads cleanly",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = {}
    for status in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            if name in ACCEPTANCE_LABELS and getattr(report, "when", "call") in ("call", "setup"):
                results.setdefault(name, status.upper())
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name in ACCEPTANCE_LABELS:
        if name in results:
            status = {"PASSED": "PASS", "FAILED": "FAIL", "ERROR": "FAIL", "SKIPPED": "SKIP"}[
                results[name]
            ]
            terminalreporter.write_line(f"[{status}] {ACCEPTANCE_LABELS[name]}")
