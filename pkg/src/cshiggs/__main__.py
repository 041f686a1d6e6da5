"""python -m cshiggs"""
import sys

from .cli import main

sys.exit(main())
