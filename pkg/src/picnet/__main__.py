import sys

from picnet.harness.cli import main

sys.exit(main())
