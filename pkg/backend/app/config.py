import os
from pathlib import Path

# Base directory
BASE_DIR = Path(__file__).resolve().parent.parent

# Results directory for sweep CSV files
RESULTS_DIR = os.environ.get("COHERENCE_RESULTS_DIR", os.path.join(BASE_DIR, "results"))
os.makedirs(RESULTS_DIR, exist_ok=True)

# Semidefinite-program solver settings
SOLVER_SETTINGS = {
    "tol": float(os.environ.get("COHERENCE_SDP_TOL", 1e-8)),  # duality gap
    "max_iter": int(os.environ.get("COHERENCE_SDP_MAX_ITER", 200)),
    "step_fraction": 0.95,  # fraction of the step to the cone boundary
    "acceptable_gap": 1e-7,  # non-Optimal results below this gap are used with a warning
}

# Numerical tolerances shared by the linear-algebra, entropy and coherence layers
TOLERANCES = {
    "hermitian": 1e-12,
    "trace": 1e-10,
    "psd_error": 1e-8,  # eigenvalues below -psd_error are rejected, above are clipped
    "support": 1e-9,  # mass of rho outside supp(sigma) that counts as a violation
    "rank": 1e-12,  # eigenvalues at or below this are outside the support
    "amplitude": 1e-8,  # coherence-rank counting threshold on |a_ji|
    "off_diagonal": 1e-10,
    "route_flag": 1e-5,  # route disagreement that flags a report
}

# Conditional-entropy settings
ENTROPY_SETTINGS = {
    # Largest d_A * d_B * rank for which H_max uses the purification SDP
    "purification_sdp_max_dim": int(os.environ.get("COHERENCE_PURIFICATION_SDP_MAX_DIM", 64)),
}

# Convex-roof (C_f, C_0) heuristic search settings
CONVEX_ROOF_SETTINGS = {
    "restarts": int(os.environ.get("COHERENCE_ROOF_RESTARTS", 64)),
    "tol": 1e-7,
    "max_evaluations": 4000,  # per restart
    "max_workers": int(os.environ.get("COHERENCE_ROOF_WORKERS", 1)),
    "seed": 0,
    "max_size": None,  # largest decomposition size; None means d**2
    "sparse_nodes": 64,  # depth-first rank-reduction nodes per restart
}

# Sweep settings for the plus-mix, plus3-mix and bloch-grid families
SWEEP_SETTINGS = {
    "nu_steps": 101,
    "beta_steps": 51,
    "gamma_steps": 51,
    "significant_digits": 9,
    "max_workers": int(os.environ.get("COHERENCE_SWEEP_WORKERS", 4)),
}

# API settings
API_SETTINGS = {
    "max_dim": 16,
    "allowed_origins": ["*"],  # For production, restrict to the frontend URL
}
