"""Collects one [PASS]/[FAIL] line per acceptance criterion for the run summary."""

LINES = []


def record(name: str, ok: bool, detail: str = "") -> bool:
    tag = "PASS" if ok else "FAIL"
    line = f"[{tag}] {name}" + (f" ({detail})" if detail else "")
    LINES.append(line)
    print(line)
    return ok
