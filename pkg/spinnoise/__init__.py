# __init__.py
from .interfaces.config import RunConfig
from .runner.run_wrapper import run
from . import errors
from . import interfaces

__all__ = ["RunConfig", "run", "errors", "interfaces"]
