"""Reference stdio backend for the upscaler wire protocol."""

__version__ = "0.1.0"

from .server import ServerConfig, load_model_hook, serve
