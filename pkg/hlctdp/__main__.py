import sys

from hlctdp.cli import main

sys.exit(main())
