"""HTTP scoring service around a neural regard classifier.

Wire contract (shared with the audit toolkit's http regard backend):
POST /v1/regard with {"texts": [1..64 strings]} returns order-aligned
{"results": [{"negative", "neutral", "positive", "other"}, ...]};
GET /healthz returns 200 "ok" once the model is loaded, 503 before.
"""

from .app import create_app

__all__ = ["create_app"]
__version__ = "0.1.0"
