"""
数据访问层模块
"""
