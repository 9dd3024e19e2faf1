import sys

from scoutpf.harness.cli import main

sys.exit(main())
