"""Built-in element kinds. Importing this package registers them all."""

from . import basic, combine, convert, filter, flow, transform  # noqa: F401
from ..element import ELEMENT_KINDS  # noqa: F401
