from .polarimeter import polarimeter_readout
from .probe import apply_loss, loss_for_target, sample_probe_noise

__all__ = ["apply_loss", "loss_for_target", "polarimeter_readout", "sample_probe_noise"]
