"""
计算核心：多项式、光滑性、计数引擎、表示数与指数
"""
