"""
Error types for the monomer-dimer toolkit
أنواع الأخطاء - كل خطأ يحمل رسالة وموقعًا اختياريًا على الشبكة
"""


class ModelError(Exception):
    """خطأ في النموذج - Base error carrying an optional lattice location"""
    kind = "model"

    def __init__(self, message, location=None):
        self.message = message
        self.location = location      # VertexId / EdgeId / Rect or (section, key)
        super().__init__(self.format_error())

    def format_error(self):
        if self.location is not None:
            return f"{self.kind} error at {self.location!r}: {self.message}"
        return f"{self.kind} error: {self.message}"


class GeometryError(ModelError):
    """خطأ هندسي - Incompatible rectangles, windows or tori"""
    kind = "geometry"


class InvalidMoveError(ModelError):
    """حركة غير صالحة - A move that breaks the hard-core constraint"""
    kind = "move"


class GuardrailError(ModelError):
    """تجاوز حد التعداد - Enumeration request too large"""
    kind = "guardrail"


class SpectrumError(ModelError):
    """خطأ طيفي - Characteristic cubic with non-real roots"""
    kind = "spectrum"


class PreconditionError(ModelError):
    """شرط مسبق غير محقق - Operation called outside its contract"""
    kind = "precondition"


class ConfigError(ModelError):
    """خطأ في الإعدادات - Bad experiment configuration"""
    kind = "config"

    def format_error(self):
        if self.location is not None:
            section, key = self.location
            if key is not None:
                return f"config error in [{section}] key '{key}': {self.message}"
            return f"config error in [{section}]: {self.message}"
        return f"config error: {self.message}"
