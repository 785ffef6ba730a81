from fastapi import BackgroundTasks, FastAPI, HTTPException, Query
from pydantic import ValidationError

from app.core.config import VERSION, configure_logging, settings
from app.core.units import db_to_linear
from app.core.workflow import FIGURES, run_reproduction_jobs
from app.models.params import SystemParams
from app.services import analytic
from app.services.results_store import ResultsStore

app = FastAPI(title="Multicast D2D Analysis")


@app.on_event("startup")
async def startup_event():
    configure_logging(settings.LOG_LEVEL)


@app.get("/health")
async def health_check():
    return {
        "status": "active",
        "service": "Multicast D2D Analysis",
        "version": VERSION,
        "config": {
            "seed": settings.SEED,
            "trials": settings.TRIALS,
            "threads": settings.THREADS,
            "output_dir": settings.OUTPUT_DIR,
        },
    }


@app.get("/coverage")
def coverage(
    distance: float = Query(..., gt=0, description="transmitter-receiver distance, m"),
    tau_m: int = Query(1, ge=1),
    detection_threshold_db: float = Query(-3.0),
    cluster_radius: float = Query(150.0, gt=0),
):
    try:
        params = SystemParams.baseline(
            tau_m=tau_m,
            detection_threshold=db_to_linear(detection_threshold_db),
            cluster_radius=cluster_radius,
        )
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=str(e))
    p = analytic.coverage_probability(distance, params)
    pc = analytic.bs_coverage_pc(params)
    body = {
        "distance": distance,
        "tau_m": tau_m,
        "coverage": p,
        "bs_coverage": pc,
        "assisted_coverage": analytic.assisted_coverage(distance, params, pc=pc),
    }
    if tau_m >= 2:
        lower, upper = analytic.bonferroni_bounds(distance, params, 1)
        body["bounds"] = {"lower": lower, "upper": upper}
    return body


@app.post("/reproduce/{figure}")
async def reproduce(figure: str, background_tasks: BackgroundTasks):
    if figure not in FIGURES:
        raise HTTPException(status_code=404, detail=f"unknown figure {figure}")
    background_tasks.add_task(run_reproduction_jobs, [figure])
    return {"status": f"{figure} reproduction triggered in background", "csv": f"{settings.OUTPUT_DIR}/{figure}.csv"}


@app.get("/results")
async def get_results():
    return {"output_dir": settings.OUTPUT_DIR, "files": ResultsStore().list_results()}
