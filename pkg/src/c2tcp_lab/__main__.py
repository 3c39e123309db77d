import sys

from c2tcp_lab.cli import main

sys.exit(main())
