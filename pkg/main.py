"""
markov-ttsa entry point.
Runs the experiment CLI; see ``python main.py --help``.
"""
import sys

from src.harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
