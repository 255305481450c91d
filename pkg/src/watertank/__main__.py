import sys

from watertank.cli import main

sys.exit(main())
