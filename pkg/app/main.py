from fastapi import FastAPI

from app.core.config import settings
from app.core.logging_config import setup_logging
from app.routers.solve import router as solve_router

# Setup logging (must be done before any other imports that use logging)
setup_logging(log_level=settings.LOG_LEVEL)


app = FastAPI(
    title="Prosumer QAOA API",
    description="Prosumer load scheduling compiled to QUBO/Ising and solved with statevector QAOA and Recursive QAOA",
    version="0.1.0",
)

app.include_router(solve_router, prefix="/api/v1")


@app.get("/")
async def root():
    return {"message": f"Welcome to {settings.APP_NAME}"}


@app.get("/health")
async def health_check():
    return {"status": "healthy"}
