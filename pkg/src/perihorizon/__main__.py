import sys

from perihorizon.cli import main

sys.exit(main())
