"""
命令行处理模块
"""
