#!/usr/bin/env python3
"""Run `nsdensity timedep`; extra arguments are passed through.

Example: python scripts/timedep.py --config scripts/configs/smoke.cfg --out out/timedep
"""
import sys

from nsdensity.cli import main

if __name__ == "__main__":
    sys.exit(main(["timedep", *sys.argv[1:]]))
