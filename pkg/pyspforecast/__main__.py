import sys

from pyspforecast.cli import main

sys.exit(main())
