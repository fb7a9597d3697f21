# Proxy-pair transport: LPC, IPC over unix sockets, and the TEE simulation
from .config import SUPPORTED_VARIANTS, Boundary, CallMode, IsolationConfig, socket_path, supported_configs
from .wire import MessageType, WireMessage, decode_frame, decode_value, encode_frame, encode_value

__all__ = [
    "Boundary",
    "CallMode",
    "IsolationConfig",
    "MessageType",
    "SUPPORTED_VARIANTS",
    "WireMessage",
    "decode_frame",
    "decode_value",
    "encode_frame",
    "encode_value",
    "socket_path",
    "supported_configs",
]
