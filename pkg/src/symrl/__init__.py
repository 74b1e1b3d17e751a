"""DDPG with symmetric data / critic augmentation on aircraft lateral dynamics."""

__version__ = "0.1.0"
