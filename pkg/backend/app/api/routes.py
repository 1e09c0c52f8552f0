from fastapi import APIRouter, HTTPException, Depends
import logging

from app.api.schemas import ComputeRequest, CoherenceReportModel, SweepSpec, SweepResponse
from app.config import API_SETTINGS, CONVEX_ROOF_SETTINGS, ENTROPY_SETTINGS, SOLVER_SETTINGS, TOLERANCES
from app.exceptions import SolverFailureError, StateParseError, ValidationError
from app.utils.processor import CoherenceProcessor

# Set up logging
logger = logging.getLogger(__name__)

# Create router
router = APIRouter()

# Processor shared by all requests; it holds no per-request state
processor = CoherenceProcessor()
logger.info("Initialized coherence processor")

# Helper function to get processor instance
def get_processor():
    return processor

def _raise_http(e: Exception):
    if isinstance(e, StateParseError):
        raise HTTPException(status_code=400, detail=str(e))
    if isinstance(e, ValidationError):
        raise HTTPException(status_code=422, detail=str(e))
    if isinstance(e, SolverFailureError):
        raise HTTPException(status_code=500, detail=str(e))
    logger.error(f"Unexpected error: {str(e)}")
    raise HTTPException(status_code=500, detail=f"Error: {str(e)}")

@router.post("/compute", response_model=CoherenceReportModel)
def compute(request: ComputeRequest, processor: CoherenceProcessor = Depends(get_processor)):
    """
    Compute coherence measures of one state
    """
    if request.state.dim > API_SETTINGS["max_dim"]:
        raise HTTPException(status_code=422, detail=f"Dimension {request.state.dim} exceeds {API_SETTINGS['max_dim']}")
    try:
        rho = request.state.to_density_matrix()
        report = processor.compute(rho, request.measures, allow_heuristic=request.allow_heuristic, seed=request.seed)
        return report.to_dict()
    except Exception as e:
        logger.error(f"Error computing report: {str(e)}")
        _raise_http(e)

@router.post("/sweep", response_model=SweepResponse)
def sweep(spec: SweepSpec, processor: CoherenceProcessor = Depends(get_processor)):
    """
    Run a plus-mix, plus3-mix or bloch-grid sweep (file-based families are CLI only)
    """
    if spec.family == "custom-file":
        raise HTTPException(status_code=400, detail="custom-file sweeps are only available from the command line")
    try:
        return processor.sweep(spec).to_dict()
    except Exception as e:
        logger.error(f"Error running sweep: {str(e)}")
        _raise_http(e)

@router.get("/system-info")
async def get_system_info():
    """
    Get solver and tolerance configuration
    """
    return {
        "solver": SOLVER_SETTINGS,
        "tolerances": TOLERANCES,
        "entropy": ENTROPY_SETTINGS,
        "convex_roof": CONVEX_ROOF_SETTINGS,
        "max_dim": API_SETTINGS["max_dim"],
    }
