from .http import make_server, serve_in_thread
from .service import BrokerConfig, BrokerService, ConsumerProfile, ProviderRecord

__all__ = [
    "BrokerConfig",
    "BrokerService",
    "ConsumerProfile",
    "ProviderRecord",
    "make_server",
    "serve_in_thread",
]
