#!/usr/bin/env python3
"""Run the full showcase battery and write verdicts + figures to ./qh-out."""

import sys

from qhtk.cli import dispatch


def main():
    fast = "--fast" in sys.argv
    rc = dispatch(["all-examples"] + (["--fast"] if fast else []) + ["--out", "qh-out"])
    sys.exit(rc)


if __name__ == "__main__":
    main()
