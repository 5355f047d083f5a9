import argparse
import sys

from qc_semilinear.cli import main as run_cli
from qc_semilinear.config import MODES


def main():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--mode", type=str, choices=MODES, help="Shortcut for --override run.mode=<mode>")
    args, rest = parser.parse_known_args()

    if args.mode:
        rest += ["--override", f"run.mode={args.mode}"]
    sys.exit(run_cli(rest))


if __name__ == "__main__":
    main()
