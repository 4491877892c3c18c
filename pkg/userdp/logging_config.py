import logging
from pathlib import Path

from .settings import Settings

settings = Settings()

logger = logging.getLogger("userdp")
logger.setLevel(logging.DEBUG)

formatter = logging.Formatter(
    "%(asctime)s - %(name)s - %(levelname)s - %(message)s", datefmt="%Y-%m-%d %H:%M:%S"
)

console_handler = logging.StreamHandler()
console_handler.setLevel(settings.log_level.upper())
console_handler.setFormatter(formatter)
logger.addHandler(console_handler)

if settings.log_to_file:
    log_dir = Path(settings.log_dir)
    log_dir.mkdir(exist_ok=True)

    file_handler = logging.FileHandler(log_dir / "userdp.log")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)
