# -*- coding: utf-8 -*-

"""Top-level package for socialnav."""

__author__ = """MIT Data To AI Lab"""
__email__ = 'dailabmit@gmail.com'
__version__ = '0.1.0.dev0'

from socialnav.config import RunConfig
from socialnav.pipeline import SocialNavPipeline

__all__ = (
    'RunConfig',
    'SocialNavPipeline',
)
