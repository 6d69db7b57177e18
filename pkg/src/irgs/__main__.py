import sys

from irgs.cli import main

sys.exit(main())
