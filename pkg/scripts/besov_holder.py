#!/usr/bin/env python3
"""Run `nsdensity besov-holder`; extra arguments are passed through.

Example: python scripts/besov_holder.py --config scripts/configs/smoke.cfg --out out/besov_holder
"""
import sys

from nsdensity.cli import main

if __name__ == "__main__":
    sys.exit(main(["besov-holder", *sys.argv[1:]]))
