#!/usr/bin/env python3
"""
PICNIQ CLI Startup Script
Runs the command-line interface from a source checkout.

    python start_cli.py simulate --n 15 --design full --k 30 --seed 1 --out runs/sim
    python start_cli.py scale --input runs/sim/matrix.csv --method mle --output runs/sim/scores.json
"""

import sys
import os

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

if __name__ == "__main__":
    from cli.main import main

    sys.exit(main())
