import sys

from hdpaired.cli import main

sys.exit(main())
