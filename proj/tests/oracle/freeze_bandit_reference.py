"""Freeze bandit's findings over the analyzer fixtures.

Usage: python3 freeze_bandit_reference.py FIXTURE_DIR OUT_JSON
Output maps file name to a sorted list of {"test_id", "line"}.
"""
import json
import subprocess
import sys
from pathlib import Path

RULES = "B101,B102,B105,B301,B306,B311,B324,B501,B506,B602,B608"


def main():
    fixture_dir = Path(sys.argv[1])
    out = Path(sys.argv[2])
    files = sorted(p.name for p in fixture_dir.glob("*.py"))
    proc = subprocess.run(
        ["bandit", "-q", "-f", "json", "-t", RULES, *files],
        cwd=fixture_dir, capture_output=True, text=True)
    data = json.loads(proc.stdout)
    result = {name: [] for name in files}
    for r in data["results"]:
        result[Path(r["filename"]).name].append({"test_id": r["test_id"], "line": r["line_number"]})
    for name in result:
        result[name].sort(key=lambda f: (f["line"], f["test_id"]))
    meta = {"tool": "bandit", "version": subprocess.run(["bandit", "--version"], capture_output=True,
                                                        text=True).stdout.split()[1]}
    out.write_text(json.dumps({"meta": meta, "files": result}, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
