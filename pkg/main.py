#!/usr/bin/env python3
"""
F-SLM Simulator

Monte-Carlo simulation of fiber-paddle spatial light modulation in a
graded-index multimode fiber.

Usage:
    python main.py --config run.json [--workers N] [--output DIR] [--quiet]
"""

import multiprocessing
import sys

from cli import main


if __name__ == "__main__":
    multiprocessing.freeze_support()
    sys.exit(main())
