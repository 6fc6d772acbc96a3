#!/usr/bin/env python3
"""Run every bundled scenario file and write the result tables under out/.

Usage: python scripts/reproduce_tables.py [out_dir]
"""

import sys
from pathlib import Path
from importlib.resources import files

from hypergameopt import report


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out")
    out_dir.mkdir(parents=True, exist_ok=True)
    data = files("hypergameopt") / "data"
    failed = False
    for name in ("table1.scn", "table2.scn", "table4.scn", "table5.scn",
                 "table6.scn"):
        sfile, results = report.run_scenarios(str(data / name))
        csv_path = out_dir / name.replace(".scn", ".csv")
        csv_path.write_text(report.results_to_csv(sfile, results, ndigits=None))
        rounded = out_dir / name.replace(".scn", "_rounded.csv")
        rounded.write_text(report.results_to_csv(sfile, results, ndigits=3))
        report.emit_figures(sfile, results, out_dir / "figures")
        bad = report.failures(results)
        if bad:
            failed = True
            print(f"{name}: FAILED {bad}")
        else:
            print(f"{name}: ok -> {csv_path}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
