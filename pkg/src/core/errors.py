"""
统一异常定义
所有计算模块抛出的异常都继承自 CensusError，CLI 据此映射退出码
"""

from typing import Optional


class CensusError(Exception):
    """census 工具的基础异常"""


class ArityMismatchError(CensusError, ValueError):
    """变量个数与多项式元数不一致"""


class ZeroPolynomialError(CensusError, ValueError):
    """操作要求非零多项式"""


class DegreeError(CensusError, ValueError):
    """次数参数不合法（如齐次化次数小于多项式次数）"""


class NotHomogeneousError(CensusError, ValueError):
    """投影计数要求齐次多项式"""

    def __init__(self, message: str, offending_term: Optional[str] = None):
        super().__init__(message)
        self.offending_term = offending_term


class PolynomialParseError(CensusError, ValueError):
    """多项式文本解析失败，携带出错位置"""

    def __init__(self, message: str, text: str = "", position: int = 0):
        self.text = text
        self.position = position
        detail = message
        if text:
            detail = f"{message} (位置 {position})\n  {text}\n  {' ' * position}^"
        super().__init__(detail)


class SingularPointError(CensusError, ValueError):
    """给定点是奇异点，切平面截线重数无定义"""


class DegenerateTangentSectionError(CensusError, ValueError):
    """切平面整体落在曲面内，截线退化"""


class SearchExhaustedError(CensusError, RuntimeError):
    """好切片搜索在给定半径内没有找到结果"""


class ResourceCapError(CensusError, MemoryError):
    """超出内存上限且未启用分片"""


class ParameterRangeError(CensusError, ValueError):
    """指数公式参数超出定理允许范围"""


class SeriesError(CensusError, ValueError):
    """计数序列不满足拟合或报告的前置条件"""


class SpecValidationError(CensusError, ValueError):
    """实验规格校验失败"""
