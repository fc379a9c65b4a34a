#!/usr/bin/env python3
"""Run `nsdensity l1-holder`; extra arguments are passed through.

Example: python scripts/l1_holder.py --config scripts/configs/smoke.cfg --out out/l1_holder
"""
import sys

from nsdensity.cli import main

if __name__ == "__main__":
    sys.exit(main(["l1-holder", *sys.argv[1:]]))
