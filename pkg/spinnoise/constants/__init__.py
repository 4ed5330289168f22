from .messages import SpinNoiseMessages

__all__ = ["SpinNoiseMessages"]
