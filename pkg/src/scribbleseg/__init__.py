"""Interactive segmentation engine with simulated prompts and a compact UNet."""

__version__ = "0.1.0"
