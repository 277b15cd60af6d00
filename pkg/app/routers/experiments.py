import logging
import os
import uuid
from datetime import datetime, timezone

from fastapi import APIRouter, BackgroundTasks, HTTPException, status
from fastapi.responses import FileResponse

from app.helpers.harness import compare_table, run_experiment
from app.helpers.report_pdf import cleanup_temp_file, generate_report_pdf, simple_sanitize
from app.models.experiment import (
    ExperimentHistory,
    ExperimentHistoryResponse,
    ExperimentResponse,
    ExperimentSpec,
    RunReport,
    TableMode,
)
from app.utils.errors import CusboostError
from app.utils.report_store import get_report_store

logger = logging.getLogger(__name__)

router = APIRouter()

# experiment id -> {"name", "status", "start_time", "error"}
active_experiment_tasks = {}


def conduct_experiment(experiment_id: str, spec: ExperimentSpec):
    """Run an experiment and store its report; failures are kept on the task."""
    task = active_experiment_tasks[experiment_id]
    try:
        report = run_experiment(spec)
        get_report_store().insert(
            experiment_id, task["name"], report.model_dump(mode="json")
        )
        task["status"] = "completed"
        logger.info("Experiment %s completed", experiment_id)
    except CusboostError as e:
        task["status"] = "failed"
        task["error"] = str(e)
        logger.error("Experiment %s failed: %s", experiment_id, e)
    except Exception as e:
        task["status"] = "failed"
        task["error"] = f"unexpected error: {e}"
        logger.exception("Experiment %s failed unexpectedly", experiment_id)


def _stored_report(experiment_id: str):
    task = active_experiment_tasks.get(experiment_id)
    if task is not None and task["status"] == "in_progress":
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail="Experiment is still in progress",
        )
    if task is not None and task["status"] == "failed":
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Experiment failed: {task['error']}",
        )
    record = get_report_store().get(experiment_id)
    if record is None:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND, detail="Experiment report not found"
        )
    return record


@router.post("/", response_model=ExperimentResponse)
async def request_experiment(spec: ExperimentSpec, background_tasks: BackgroundTasks):
    """Start a cross-validation experiment"""
    experiment_id = str(uuid.uuid4())
    active_experiment_tasks[experiment_id] = {
        "name": spec.name or ", ".join(spec.datasets),
        "status": "in_progress",
        "start_time": datetime.now(timezone.utc).isoformat(),
        "error": None,
    }
    background_tasks.add_task(conduct_experiment, experiment_id, spec)
    return ExperimentResponse(experiment_id=experiment_id, status="in_progress")


@router.get("/history", response_model=ExperimentHistoryResponse)
async def get_experiment_history():
    """List stored experiment reports, newest first"""
    experiments = [ExperimentHistory(**item) for item in get_report_store().history()]
    return ExperimentHistoryResponse(experiments=experiments)


@router.get("/{experiment_id}/status")
async def get_experiment_status(experiment_id: str):
    if experiment_id not in active_experiment_tasks:
        if get_report_store().get(experiment_id) is not None:
            return {"status": "completed"}
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND, detail="Experiment not found"
        )
    task = active_experiment_tasks[experiment_id]
    return {"status": task["status"], "error": task["error"]}


@router.get("/{experiment_id}")
async def get_experiment_report(experiment_id: str):
    """Get the completed run report"""
    return _stored_report(experiment_id)["report"]


@router.get("/{experiment_id}/table")
async def get_experiment_table(experiment_id: str, mode: TableMode = TableMode.mean):
    record = _stored_report(experiment_id)
    report = load_report_record(record)
    table = compare_table(report, mode)
    return {"table": table.model_dump(mode="json"), "text": table.render()}


def load_report_record(record: dict) -> RunReport:
    try:
        return RunReport.model_validate(record["report"])
    except ValueError as e:
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Stored report is unreadable: {e}",
        )


@router.get("/{experiment_id}/pdf")
async def get_experiment_pdf(experiment_id: str):
    """Render the comparison tables of a run as a PDF download"""
    record = _stored_report(experiment_id)
    report = load_report_record(record)
    pdf_path = f"temp_{experiment_id}_{uuid.uuid4().hex[:8]}.pdf"
    try:
        generate_report_pdf(report, pdf_path, title=record["name"])
    except Exception as e:
        if os.path.exists(pdf_path):
            cleanup_temp_file(pdf_path)
        logger.error("Failed to generate PDF for %s: %s", experiment_id, e)
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Failed to generate PDF: {e}",
        )

    background_tasks = BackgroundTasks()
    background_tasks.add_task(cleanup_temp_file, pdf_path)
    name = simple_sanitize(record["name"]).replace(" ", "_").replace(",", "")
    return FileResponse(
        path=pdf_path,
        filename=f"CUSBoostBench-{name}.pdf",
        media_type="application/pdf",
        background=background_tasks,
    )


@router.delete("/{experiment_id}")
async def delete_experiment_report(experiment_id: str):
    if not get_report_store().mark_deleted(experiment_id):
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND, detail="Experiment report not found"
        )
    active_experiment_tasks.pop(experiment_id, None)
    return {"message": "Experiment report deleted successfully"}
