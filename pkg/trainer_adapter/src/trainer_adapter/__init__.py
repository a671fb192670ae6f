from .adapter import Adapter, AdapterConfig, OpenSetClassifier, load_dataset, serve_protocol

__version__ = "0.1.0"
