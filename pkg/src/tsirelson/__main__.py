import sys

from tsirelson.cli import main

sys.exit(main())
