import sys
from pathlib import Path

# the figure script is used in place, not installed
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
