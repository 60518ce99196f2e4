#!/usr/bin/env python3
"""Reference pool-model plugin: repeat the last lookback value H times.

Protocol: lookback arrives as CSV rows on stdin, the horizon H as argv[1];
exactly H forecast rows must go to stdout.
"""
import sys

horizon = int(sys.argv[1])
values = [float(line) for line in sys.stdin if line.strip()]
for _ in range(horizon):
    print(values[-1])
