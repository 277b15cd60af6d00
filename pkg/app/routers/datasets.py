import logging
from typing import Optional

from fastapi import APIRouter, File, Form, HTTPException, UploadFile, status

from app.helpers.dataset import PUBLISHED_DATASETS, binarize, parse_file, summarize
from app.utils.errors import DataError

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/inspect")
async def inspect_dataset(
    file: UploadFile = File(...), positive_label: Optional[str] = Form(None)
):
    """Summarise an uploaded KEEL (.dat) or delimited dataset"""
    content = await file.read()
    try:
        ds = parse_file(content, file.filename or "upload.csv")
        summary = summarize(ds)
        view = binarize(ds, positive_label)
    except DataError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))

    logger.info("Inspected %s: %d instances", ds.name, ds.num_instances)
    published = PUBLISHED_DATASETS.get(ds.name)
    return {
        "summary": summary.model_dump(),
        "positive_label": view.positive_label,
        "positive_is_rarer": not view.warning,
        "published": (
            dict(zip(["instances", "features", "classes", "imbalance_ratio"], published))
            if published
            else None
        ),
    }
