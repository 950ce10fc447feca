"""
Grid Causal Cascade Toolkit

Learns how line outages in a power grid affect each other from simulated
observational data, then predicts the next failures of an ongoing cascade
and the costliest cascades a grid can suffer.

Features:
- MATPOWER case parsing with AC and DC power flow
- Overload-driven cascade enumeration (ground truth) and worst-case enumeration
- Cyclic causal discovery of line interactions per initiating outage
- Causal path prediction and critical cascade identification
- Influence graph and random selection baselines
- Precision, regret, candidate-count and timing reports

Usage:
    python main.py --config run.yaml gen-data
    python main.py --config run.yaml learn
    python main.py --config run.yaml ground-truth
    python main.py --config run.yaml evaluate

License: MIT
"""

import sys

from cli.commands import main


if __name__ == "__main__":
    sys.exit(main())
