from .cell import CellRunner
from .run import CampaignRunner
from .selftest import SelfTest

__all__ = ["CampaignRunner", "CellRunner", "SelfTest"]
