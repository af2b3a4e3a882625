import logging
import sys

from hlab.cli.Runner import run


def main():
    # Reports go to standard output or --out; log lines go to standard error.
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
