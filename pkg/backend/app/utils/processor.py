import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Any, Tuple, Optional

import numpy as np

from app.api.schemas import SweepSpec
from app.config import SWEEP_SETTINGS
from app.exceptions import ValidationError
from app.models.coherence import CoherenceReport, compute_report
from app.models.convex_roof import ConvexRoofSearch
from app.models.linalg import DensityMatrix, kron, plus_state, qubit_from_bloch
from app.utils.state_io import load_state_file, write_sweep_csv

# Set up logging
logger = logging.getLogger(__name__)

BASE_MEASURES = ["cmax", "cr", "cmin", "cg"]
BASE_COLUMNS = ["c_max", "c_r", "c_min", "c_g"]

@dataclass
class SweepResult:
    """Sweep rows in deterministic parameter order"""
    family: str
    columns: List[str]
    rows: List[Dict[str, float]]

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "columns": self.columns, "rows": self.rows}

def noisy_mixture(state: DensityMatrix, nu: float) -> DensityMatrix:
    """nu * rho + (1 - nu) * I/d"""
    return DensityMatrix(nu * state.matrix + (1.0 - nu) * np.eye(state.dim) / state.dim)

def bloch_vector(beta: float, gamma: float) -> Tuple[float, float, float]:
    """n = (gamma sin(beta pi), 0, cos(beta pi)), longitude fixed at 0"""
    return gamma * np.sin(beta * np.pi), 0.0, np.cos(beta * np.pi)

class CoherenceProcessor:
    """
    Computes reports for single states and parameter sweeps
    """
    def __init__(self, tol: Optional[float] = None, allow_heuristic: bool = False,
                 seed: Optional[int] = None, max_workers: Optional[int] = None,
                 search: Optional[ConvexRoofSearch] = None):
        """
        Initialize the processor

        Args:
            tol (float, optional): SDP duality-gap tolerance
            allow_heuristic (bool): Permit convex-roof upper bounds for d > 2
            seed (int, optional): Seed of the convex-roof search
            max_workers (int, optional): Threads used for sweep rows
            search (ConvexRoofSearch, optional): Convex-roof search settings
        """
        self.tol = tol
        self.allow_heuristic = allow_heuristic
        self.seed = seed
        self.max_workers = max_workers or SWEEP_SETTINGS["max_workers"]
        self.search = search

        logger.info(f"Coherence processor initialized (tol={tol}, workers={self.max_workers})")

    def compute(self, rho: DensityMatrix, measures: Optional[List[str]] = None,
                allow_heuristic: Optional[bool] = None, seed: Optional[int] = None) -> CoherenceReport:
        """
        Compute a report for one state

        Args:
            rho (DensityMatrix): State
            measures (List[str], optional): Measures to compute, all by default
            allow_heuristic (bool, optional): Overrides the processor setting for this call
            seed (int, optional): Overrides the processor seed for this call

        Returns:
            CoherenceReport: Report
        """
        allow = self.allow_heuristic if allow_heuristic is None else allow_heuristic
        return compute_report(rho, measures, allow_heuristic=allow,
                              seed=self.seed if seed is None else seed, tol=self.tol, search=self.search)

    def family_states(self, spec: SweepSpec) -> List[Tuple[Dict[str, float], DensityMatrix]]:
        """
        Parameters and states of a sweep family

        Args:
            spec (SweepSpec): Sweep specification

        Returns:
            List[Tuple[Dict[str, float], DensityMatrix]]: (parameters, state) in row order
        """
        if spec.family == "bloch-grid":
            states = []
            for beta in np.linspace(0.0, 1.0, spec.beta_steps):
                for gamma in np.linspace(0.0, 1.0, spec.gamma_steps):
                    rho = qubit_from_bloch(bloch_vector(beta, gamma))
                    states.append(({"beta": float(beta), "gamma": float(gamma)}, rho))
            return states

        if spec.family == "plus-mix":
            base = plus_state()
        elif spec.family == "plus3-mix":
            plus = plus_state().matrix
            base = DensityMatrix(kron(kron(plus, plus), plus))
        else:
            base = load_state_file(spec.state_path)
        return [({"nu": float(nu)}, noisy_mixture(base, nu)) for nu in np.linspace(0.0, 1.0, spec.nu_steps)]

    def _columns(self, spec: SweepSpec, dim: int) -> List[str]:
        params = ["beta", "gamma"] if spec.family == "bloch-grid" else ["nu"]
        suffix = "_ub" if dim > 2 else ""
        extra = []
        if "cf" in spec.measures:
            extra.append("c_f" + suffix)
        if "c0" in spec.measures:
            extra.append("c_0" + suffix)
        if spec.family != "bloch-grid":
            extra.append("route_disagreement")
        return params + BASE_COLUMNS + extra

    def _row(self, params: Dict[str, float], rho: DensityMatrix, spec: SweepSpec) -> Dict[str, float]:
        extra = [m for m in ("cf", "c0") if m in spec.measures]
        report = compute_report(rho, BASE_MEASURES + extra, allow_heuristic=spec.allow_heuristic,
                                seed=spec.seed, tol=self.tol, search=self.search)
        suffix = "_ub" if rho.dim > 2 else ""
        row = dict(params)
        row.update({"c_max": report.c_max, "c_r": report.c_r, "c_min": report.c_min, "c_g": report.c_g})
        if report.c_f is not None:
            row["c_f" + suffix] = report.c_f.value
        if report.c_0 is not None:
            row["c_0" + suffix] = report.c_0.value
        row["route_disagreement"] = report.route_disagreement
        return row

    def sweep(self, spec: SweepSpec) -> SweepResult:
        """
        Run a sweep; rows are computed concurrently and returned in parameter order

        Args:
            spec (SweepSpec): Sweep specification

        Returns:
            SweepResult: Columns and rows
        """
        items = self.family_states(spec)
        dim = items[0][1].dim
        if any(m in spec.measures for m in ("cf", "c0")) and dim > 2 and not spec.allow_heuristic:
            raise ValidationError("cf/c0 for d > 2 are heuristic upper bounds; pass allow_heuristic to compute them")

        start_time = time.time()
        logger.info(f"Sweep {spec.family}: {len(items)} rows, d={dim}")
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            rows = list(executor.map(lambda item: self._row(item[0], item[1], spec), items))
        logger.info(f"Sweep {spec.family} completed in {time.time() - start_time:.1f}s")

        columns = self._columns(spec, dim)
        return SweepResult(family=spec.family, columns=columns,
                           rows=[{c: row[c] for c in columns} for row in rows])

    def sweep_to_csv(self, spec: SweepSpec, path: str) -> SweepResult:
        result = self.sweep(spec)
        write_sweep_csv(result.columns, result.rows, path)
        return result
