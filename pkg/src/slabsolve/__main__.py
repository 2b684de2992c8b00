import sys

from slabsolve.cli import main

sys.exit(main())
