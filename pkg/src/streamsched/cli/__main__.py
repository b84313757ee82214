import sys

from streamsched.cli import main

sys.exit(main())
