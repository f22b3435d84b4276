import sys
from pathlib import Path

# make sibling helper modules (numgrad) importable regardless of invocation dir
sys.path.insert(0, str(Path(__file__).parent))
