from .interface import run  # noqa: F401
