from .cli import cclab

cclab()
