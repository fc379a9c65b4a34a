#!/usr/bin/env python3
"""Run `nsdensity diagnostics`; extra arguments are passed through.

Example: python scripts/diagnostics.py --config scripts/configs/smoke.cfg --out out/diagnostics
"""
import sys

from nsdensity.cli import main

if __name__ == "__main__":
    sys.exit(main(["diagnostics", *sys.argv[1:]]))
