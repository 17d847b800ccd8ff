"""Three-class MRI slice classification with a from-scratch deep ConvNet."""

__version__ = "0.1.0"

CLASS_NAMES = ("NC", "MCI", "AD")
