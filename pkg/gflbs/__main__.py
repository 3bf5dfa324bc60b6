import sys

from gflbs.cli import main

sys.exit(main())
