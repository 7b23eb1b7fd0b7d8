import sys

from draftlmt.cli import main

sys.exit(main())
