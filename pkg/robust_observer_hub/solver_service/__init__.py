from .backends import (  # noqa: F401
    BackendResult,
    BaseSdpBackend,
    CanonicalBlock,
    CanonicalSdp,
    SolverStatus,
    get_backend,
)
