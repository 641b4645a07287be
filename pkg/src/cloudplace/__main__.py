import sys

from cloudplace.cli import main

sys.exit(main())
