"""Shared pytest hooks: print one pass/fail line per acceptance check."""

ACCEPTANCE = {
    "test_masked_mse_constant_and_mc_agreement": (
        1, "masked-weight error constant and closed-vs-MC agreement"),
    "test_error_ordering_and_gap_identities": (
        2, "deployment-error ordering and difference identities"),
    "test_truncation_optimality_and_tail_bound": (
        3, "best rank-r truncation error and per-entry tail bound"),
    "test_training_gradient_and_step_sizes": (
        4, "refinement gradient, step sizes, and divergence guard"),
    "test_fusion_exactness_and_two_products": (
        5, "fused adapter path exactness and product count"),
    "test_codec_lut_and_round_trips": (
        6, "decode table and bit-exact format round trips"),
    "test_pipeline_schedules_and_ring_protocol": (
        7, "pipeline schedule equivalence and ring protocol"),
    "test_size_formula_and_compression_ratio": (
        8, "container size formula and compression ratio"),
    "test_end_to_end_compress_artifact": (
        9, "end-to-end compress artifact error and captured energy"),
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::" not in nodeid:
                continue
            name = nodeid.rsplit("::", 1)[-1]
            if name in ACCEPTANCE:
                ok = outcome == "passed"
                prev = results.get(name)
                results[name] = ok if prev is None else (prev and ok)
    if not results:
        return
    tw = terminalreporter
    tw.section("acceptance results")
    for name, (num, label) in sorted(ACCEPTANCE.items(), key=lambda kv: kv[1][0]):
        if name not in results:
            continue
        verdict = "PASS" if results[name] else "FAIL"
        tw.write_line(f"[{num}] {label}: {verdict}")
