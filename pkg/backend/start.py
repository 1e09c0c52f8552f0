import os

import uvicorn

from app.config import RESULTS_DIR, SOLVER_SETTINGS

if __name__ == "__main__":
    # Host, port and log level come from the environment
    host = os.environ.get("HOST", "0.0.0.0")
    port = int(os.environ.get("PORT", 8000))
    log_level = os.environ.get("LOG_LEVEL", "info").lower()

    print(f"Starting coherence API on {host}:{port} "
          f"(SDP tol {SOLVER_SETTINGS['tol']:.0e}, results in {RESULTS_DIR})")

    uvicorn.run(
        "app.main:app",
        host=host,
        port=port,
        reload=False,
        workers=1,
        log_level=log_level
    )
