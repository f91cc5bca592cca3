from .builder import NlyBuilder, VERSION, float_format
from .reader import NlyDocument
