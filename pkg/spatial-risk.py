import sys

from src.spatialrisk.cli import main

if __name__ == "__main__":
    sys.exit(main())
