#!/usr/bin/env python3
import sys

from robust_observer_hub.cli import run


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
