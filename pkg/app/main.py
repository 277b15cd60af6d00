from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.routers import datasets, experiments
from app.utils.settings import configure_logging

configure_logging()

app = FastAPI(
    title="CUSBoost Bench",
    description="Cluster-based under-sampling with boosting, its comparators and a cross-validation harness.",
    version="0.1.0",
    redirect_slashes=False,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:5173"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/")
async def root():
    return {"message": "Welcome to CUSBoost Bench"}


@app.get("/health")
async def health_check():
    return {"status": "healthy"}


app.include_router(experiments.router, prefix="/api/experiments", tags=["experiments"])
app.include_router(datasets.router, prefix="/api/datasets", tags=["datasets"])
