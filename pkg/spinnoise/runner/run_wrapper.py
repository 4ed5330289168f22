from typing import Iterable, Optional

from spinnoise.interfaces.campaign import CampaignReport
from spinnoise.interfaces.config import RunConfig
from spinnoise.interfaces.spectrum import Channel

from .run import CampaignRunner


def run(
    config: Optional[RunConfig] = None,
    channels: Optional[Iterable[Channel]] = None,
    jobs: Optional[int] = None,
) -> CampaignReport:
    """
    A convenience wrapper to run a power-sweep campaign.

    :param config: The run document (default: RunConfig() with environment overrides).
    :param channels: Lock-in channels to analyse.
    :param jobs: Number of cells processed concurrently.
    """
    return CampaignRunner.run_campaign(
        config=config if config is not None else RunConfig(),
        channels=channels,
        jobs=jobs,
    )
