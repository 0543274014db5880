import sys

from carbm.cli import main

sys.exit(main())
