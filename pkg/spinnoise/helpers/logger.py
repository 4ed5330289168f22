import logging
import colorlog
from typing import Dict, Any
from spinnoise.helpers.constants import LOG_LEVEL


class Singleton(type):
    _instances: Dict[Any, Any] = {}

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            cls._instances[cls] = super(Singleton, cls).__call__(*args, **kwargs)
        return cls._instances[cls]


class AppLogger(logging.Logger, metaclass=Singleton):
    """
    Colour console logger shared by every stage of the pipeline.
    """

    def __init__(self, name, level=logging.NOTSET):
        super().__init__(name, level)

        console_handler = colorlog.StreamHandler()
        console_handler.setFormatter(
            colorlog.ColoredFormatter(
                "%(log_color)s%(asctime)s %(levelname)-7s %(message)s",
                datefmt="%H:%M:%S",
                log_colors={
                    "DEBUG": "cyan",
                    "INFO": "white",
                    "WARNING": "yellow",
                    "ERROR": "red",
                    "CRITICAL": "bold_red",
                },
            )
        )
        self.addHandler(console_handler)
        self.propagate = False

    def args_str(self, *args):
        return ", ".join([str(arg) for arg in args])

    def _with_args(self, message, *args):
        if not args:
            return str(message)
        return f"{message} {self.args_str(*args)}"

    def debug(self, message, *args):
        super(AppLogger, self).debug(self._with_args(message, *args))

    def info(self, message, *args):
        super(AppLogger, self).info(self._with_args(message, *args))

    def success(self, message, *args):
        # Call the base class's info method to prevent recursion
        super(AppLogger, self).info(
            f"\033[32m{self._with_args(message, *args)}\033[0m"
        )

    def error(self, message, *args):
        super(AppLogger, self).error(self._with_args(message, *args))

    def warning(self, message, *args):
        super(AppLogger, self).warning(self._with_args(message, *args))


def setup_logger():
    logger = AppLogger("spinnoise", level=logging.getLevelName(LOG_LEVEL.upper()))
    return logger


# Create a default logger instance
logger = setup_logger()
