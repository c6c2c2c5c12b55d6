"""Run the acceptance module and print its summary lines (same as pytest tests/test_acceptance.py)."""
import subprocess
import sys
from pathlib import Path

root = Path(__file__).resolve().parents[1]
sys.exit(subprocess.call([sys.executable, "-m", "pytest", "-q", str(root / "tests" / "test_acceptance.py")]))
