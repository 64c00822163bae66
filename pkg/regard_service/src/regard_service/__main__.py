"""Run the service: REGARD_MODEL_PATH=... python -m regard_service"""
import os

import uvicorn

from .app import create_app


def main() -> None:
    uvicorn.run(
        create_app(),
        host=os.environ.get("REGARD_HOST", "127.0.0.1"),
        port=int(os.environ.get("REGARD_PORT", "8301")),
    )


if __name__ == "__main__":
    main()
