import sys

from swa_toolkit.main import main

sys.exit(main())
