#!/usr/bin/env python3
"""Run the acceptance suite and print one pass/fail line per criterion.

Usage: python scripts/run_acceptance.py [--fast]
"""

import sys

from hypergameopt import acceptance


def main() -> int:
    fast = "--fast" in sys.argv[1:]
    results = acceptance.run_all(fast=fast)
    ok = acceptance.print_report(results)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
