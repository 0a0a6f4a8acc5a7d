import os
import sys

# Tests import 'core' and 'commands' the way OptionMarket.py does
APP_DIR = os.path.dirname(os.path.abspath(__file__))
if APP_DIR not in sys.path:
    sys.path.insert(0, APP_DIR)
