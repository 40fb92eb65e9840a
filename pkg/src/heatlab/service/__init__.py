"""FastAPI service wrapping the verification harness.

Run it with ``uvicorn heatlab.service:app``; the CLI talks to the same app
in-process by default, so no server is needed for local runs.
"""

from .app import app, create_app

__all__ = ["app", "create_app"]
