from .database import ResultStore  # noqa: F401
from .settings import Settings  # noqa: F401
