from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from functools import lru_cache
from typing import List

from app.config import settings
from app.engines.flat_tree import FlatTree
from app.engines.tree_model import NOT_FOUND, Key256
from app.errors import BatchSearchError, InvalidKeyError
from app.models import (
    HealthResponse, SearchRequest, SearchResponse, TreeMeta, TreeSummary, VerifyReport, VerifyRequest,
)
from app.orchestrator import search_keys, summarize_tree, verify_keys
from app.storage import storage

import logging

logger = logging.getLogger(__name__)

# Create FastAPI app
app = FastAPI(
    title="Batched B+ Tree Search API",
    description="Level-wise batched search over a flat serialized tree",
    version="1.0.0"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["*"],
    allow_headers=["*"],
)


@lru_cache()
def load_tree() -> FlatTree:
    if not settings.tree_path:
        raise FileNotFoundError("no tree configured (set BATCHSEARCH_TREE_PATH)")
    tree = storage.read_tree(settings.tree_path)
    logger.info(f"✓ Serving tree {settings.tree_path}: {tree.meta.entry_count} entries, height {tree.meta.height_h}")
    return tree


def get_tree() -> FlatTree:
    """Tree dependency; tests override it with an in-memory tree"""
    try:
        return load_tree()
    except (OSError, BatchSearchError) as e:
        logger.error(f"❌ Tree unavailable: {e}")
        raise HTTPException(503, f"tree unavailable: {e}")


@app.exception_handler(BatchSearchError)
async def batch_search_error_handler(request: Request, exc: BatchSearchError):
    return JSONResponse(status_code=400, content=exc.to_dict())


def parse_keys(raw: List[str]) -> List[Key256]:
    keys = []
    for i, text in enumerate(raw):
        try:
            keys.append(Key256.from_hex(text))
        except InvalidKeyError as e:
            raise InvalidKeyError(f"key {i}: {e}")
    return keys


@app.get("/")
async def root():
    return {
        "status": "online",
        "service": "batched-bplus-search",
        "version": "1.0.0",
    }


@app.get("/health", response_model=HealthResponse)
async def health_check():
    try:
        load_tree()
        loaded = True
    except (OSError, BatchSearchError):
        loaded = False
    return HealthResponse(
        status="healthy" if loaded else "degraded",
        tree_loaded=loaded,
        max_batch=settings.max_batch,
    )


@app.get("/tree", response_model=TreeMeta)
async def tree_meta(tree: FlatTree = Depends(get_tree)):
    return tree.meta


@app.get("/tree/summary", response_model=TreeSummary)
async def tree_summary(tree: FlatTree = Depends(get_tree)):
    return summarize_tree(tree)


@app.post("/search", response_model=SearchResponse)
def search(request: SearchRequest, tree: FlatTree = Depends(get_tree)):
    """
    Search a batch of 64-hex-digit keys in any order.
    Results come back in request order; absent keys yield 2^64 - 1.
    """
    run = search_keys(tree, parse_keys(request.keys), request.instances)
    results = [int(v) for v in run.results]
    return SearchResponse(
        results=results,
        found=[v != NOT_FOUND for v in results],
        stats=run.stats,
    )


@app.post("/verify", response_model=VerifyReport)
def verify(request: VerifyRequest, tree: FlatTree = Depends(get_tree)):
    return verify_keys(tree, parse_keys(request.keys))


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "app.main:app",
        host=settings.api_host,
        port=settings.api_port,
        reload=settings.debug
    )
