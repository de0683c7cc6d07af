"""Shared fixtures: live servers on ephemeral ports, shut down at session end."""

import threading
import time

import pytest
import uvicorn

from model_server import ServerConfig, build_app, load_backends


@pytest.fixture(scope="session")
def server_factory():
    """Start a server thread for a config (or prebuilt backends); returns base URL."""
    running: list[tuple[uvicorn.Server, threading.Thread]] = []

    def start(config: ServerConfig | None = None, backends=None) -> str:
        cfg = config or ServerConfig(port=0)
        app = build_app(backends if backends is not None else load_backends(cfg), cfg)
        server = uvicorn.Server(
            uvicorn.Config(app, host=cfg.host, port=cfg.port, log_level="error")
        )
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.monotonic() + 15.0
        while not server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start within 15s")
            if not thread.is_alive():
                raise RuntimeError("server thread died during startup")
            time.sleep(0.01)
        port = server.servers[0].sockets[0].getsockname()[1]
        running.append((server, thread))
        return f"http://127.0.0.1:{port}"

    yield start
    for server, thread in running:
        server.should_exit = True
        thread.join(timeout=5)


@pytest.fixture(scope="session")
def toy_url(server_factory) -> str:
    """One all-toy server shared by read-only endpoint tests."""
    return server_factory()
