import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

SUITE_BUDGET_S = 15 * 60
_START = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    elapsed = time.perf_counter() - _START
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=int):
        ok, detail = RESULTS[key]
        if key == "7":
            fits = elapsed <= SUITE_BUDGET_S
            ok = ok and fits
            detail += f"; suite wall time {elapsed:.0f} s (budget {SUITE_BUDGET_S} s)"
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}")
