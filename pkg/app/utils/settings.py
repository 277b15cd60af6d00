import logging
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

REPORT_DIR = os.environ.get("CUSBOOST_REPORT_DIR", "reports")
DATA_DIR = os.environ.get("CUSBOOST_DATA_DIR", "data")
MAX_WORKERS = int(os.environ.get("CUSBOOST_WORKERS", 1))
LOG_LEVEL = os.environ.get("CUSBOOST_LOG_LEVEL", "INFO")

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] %(name)s: %(message)s"


def configure_logging(level: str = LOG_LEVEL):
    """Install the root handler once; later calls only adjust the level."""
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=level.upper(), format=LOG_FORMAT)
    root.setLevel(level.upper())
