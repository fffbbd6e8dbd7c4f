from pathlib import Path
EXAMPLES_DIR = Path(__file__).parent
