import sys

from fhbeam.bench.cli import main

sys.exit(main())
