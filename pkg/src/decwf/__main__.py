import sys

from decwf.cli import main

sys.exit(main())
