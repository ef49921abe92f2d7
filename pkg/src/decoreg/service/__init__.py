"""HTTP face of the package: a FastAPI app plus its request/response schemas.

The CLI talks to this app in-process through an ASGI transport by default, so
importing this subpackage is enough — no server process required.  `deco
serve` runs the same app under uvicorn for remote clients.
"""

from .app import app, create_app

__all__ = ["app", "create_app"]
