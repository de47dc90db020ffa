import sys

from adaptsearch.cli import main

sys.exit(main())
