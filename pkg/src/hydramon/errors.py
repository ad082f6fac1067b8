"""Exception types shared across the toolkit."""


class HydramonError(Exception):
    """Base class for all toolkit errors."""


# --- ingestion ---

class MalformedHeader(HydramonError):
    pass


class NonNumericSample(HydramonError):
    def __init__(self, line_index: int, text: str):
        self.line_index = line_index
        super().__init__(f"non-numeric sample at line {line_index}: {text!r}")


class EmptyBody(HydramonError):
    pass


class EmptySeries(HydramonError):
    pass


class OutOfRange(HydramonError):
    pass


class InvalidAnnotation(HydramonError):
    pass


# --- preprocessing ---

class CutoffAboveNyquist(HydramonError):
    pass


class UnsupportedOrder(HydramonError):
    pass


class WidthTooLarge(HydramonError):
    pass


class SpanCoversWholeSeries(HydramonError):
    pass


# --- decomposition ---

class InvalidTaus(HydramonError):
    pass


class RateMismatch(HydramonError):
    pass


class ZeroLeadingTap(HydramonError):
    pass


class SignalTooShort(HydramonError):
    pass


class BoundsViolation(HydramonError):
    pass


# --- features ---

class SeriesTooShort(HydramonError):
    pass


class WindowOutOfRange(HydramonError):
    pass


class TooFewSubWindows(HydramonError):
    pass


class NoLabeledWindows(HydramonError):
    pass


# --- learning ---

class EmptyDataset(HydramonError):
    pass


class FeatureOrderMismatch(HydramonError):
    pass


class NonFiniteFeature(HydramonError):
    pass


class TooFewRows(HydramonError):
    pass


class VersionMismatch(HydramonError):
    pass


class CorruptModel(HydramonError):
    pass


# --- streaming ---

class TimestampRegression(HydramonError):
    pass
