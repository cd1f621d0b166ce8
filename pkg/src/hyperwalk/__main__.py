import sys

from hyperwalk.cli import main

sys.exit(main())
