"""python -m na1lab"""

import sys

from na1lab.cli.app import main

if __name__ == "__main__":
    sys.exit(main())
