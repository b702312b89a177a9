"""
census - 超曲面有界高度整点的精确计数工具
"""

__version__ = "0.3.0"
__author__ = "census contributors"
