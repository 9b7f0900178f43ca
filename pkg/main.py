import logging
import math
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from chemdist import __version__
from chemdist.core.config import log_level, parse_experiment_config, parse_model_spec
from chemdist.core.errors import ChemdistError, FitError
from chemdist.core.experiments import run_experiment
from chemdist.core.kernels import ConnectionKernel, parse_delta, zeta, zeta_negative_region
from chemdist.core.long_edges import bracket_integral, bracket_slope
from chemdist.core.models import expected_degree, model_exponents, realize, resolve_pad
from chemdist.core.point_process import Window
from chemdist.core.renorm import psi_bound, psi_log_bound

load_dotenv()

logging.basicConfig(level=log_level(), format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
logger = logging.getLogger("chemdist.api")

# Keeps request-driven realizations small
MAX_API_POINTS = 200_000

app = FastAPI(
    title="chemdist",
    description="Chemical distances, long edges and renormalization in spatial random graphs",
    version=__version__,
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic models
class ZetaRequest(BaseModel):
    delta: str = "inf"
    gamma: float = 0.0
    gammaPrime: float = 0.0


class ModelRequest(BaseModel):
    model: Dict[str, Any] = Field(default_factory=dict)


class BracketRequest(BaseModel):
    model: Dict[str, Any] = Field(default_factory=dict)
    radii: List[float]
    logCorrected: bool = False


class PsiBoundRequest(BaseModel):
    n: int
    xi: float
    mu: float
    dim: int = 2
    c: float


class GenerateRequest(BaseModel):
    model: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None


class ExperimentRequest(BaseModel):
    config: Dict[str, Any]
    resume: bool = False


def _clean(value: Any) -> Any:
    """JSON-safe copy: NaN becomes null, infinities become strings."""
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, ChemdistError):
        return HTTPException(status_code=exc.http_status, detail=str(exc))
    logger.exception("Unexpected error")
    return HTTPException(status_code=500, detail=str(exc))


@app.get("/")
async def root():
    return {
        "message": "chemdist API",
        "version": __version__,
        "endpoints": [
            "/tools/zeta",
            "/tools/expectedDegree",
            "/tools/modelExponents",
            "/tools/bracketIntegral",
            "/tools/psiBound",
            "/tools/generate",
            "/tools/runExperiment",
        ],
    }


@app.post("/tools/zeta")
async def zeta_endpoint(body: ZetaRequest = Body(...)):
    """Exponent zeta(delta, gamma, gamma') and whether it lies in the negative region."""
    try:
        delta = parse_delta(body.delta)
        value = zeta(delta, body.gamma, body.gammaPrime)
        negative = zeta_negative_region(delta, body.gamma, body.gammaPrime)
    except Exception as e:
        raise _http_error(e)
    return _clean({"zeta": value, "negativeRegion": negative, "delta": delta})


@app.post("/tools/expectedDegree")
async def expected_degree_endpoint(body: ModelRequest = Body(...)):
    """Mean degree of a typical vertex by quadrature."""
    try:
        spec = parse_model_spec(body.model)
        if spec.is_lattice or not spec.pair_independent:
            raise HTTPException(status_code=400, detail="expected degree applies to the Poisson kernel models only")
        value = expected_degree(spec.kernel(), spec.intensity, spec.dim)
    except HTTPException:
        raise
    except Exception as e:
        raise _http_error(e)
    return _clean({"model": spec.label(), "expectedDegree": value})


@app.post("/tools/modelExponents")
async def model_exponents_endpoint(body: ModelRequest = Body(...)):
    """Predicted zeta, mu, xi and the decay rate of P(not D)."""
    try:
        spec = parse_model_spec(body.model)
        exps = model_exponents(spec)
    except Exception as e:
        raise _http_error(e)
    return _clean({
        "model": spec.label(),
        "zeta": exps.zeta,
        "dZeta": exps.d_zeta,
        "mu": exps.mu,
        "xi": exps.xi,
        "rate": exps.rate,
    })


@app.post("/tools/bracketIntegral")
async def bracket_integral_endpoint(body: BracketRequest = Body(...)):
    """Bracket integral at each radius, with the log-log slope when at least 3 radii are given."""
    try:
        spec = parse_model_spec(body.model)
        kernel: ConnectionKernel = spec.kernel()
        values = [bracket_integral(kernel, r, spec.dim) for r in body.radii]
        result: Dict[str, Any] = {
            "model": spec.label(),
            "radii": body.radii,
            "values": values,
            "prediction": model_exponents(spec).d_zeta,
        }
        try:
            result["fit"] = bracket_slope(kernel, body.radii, spec.dim, body.logCorrected).as_dict()
        except FitError as e:
            result["fit"] = None
            result["note"] = str(e)
    except Exception as e:
        raise _http_error(e)
    return _clean(result)


@app.post("/tools/psiBound")
async def psi_bound_endpoint(body: PsiBoundRequest = Body(...)):
    """Upper bound on the probability that a stage-n box is bad."""
    try:
        log_value = psi_log_bound(body.n, body.xi, body.mu, body.dim, body.c)
        value = psi_bound(body.n, body.xi, body.mu, body.dim, body.c)
    except Exception as e:
        raise _http_error(e)
    return _clean({"n": body.n, "bound": value, "logBound": log_value})


@app.post("/tools/generate")
async def generate(body: GenerateRequest = Body(...)):
    """Sample one realization and report its size; positions are not returned."""
    try:
        spec = parse_model_spec(body.model)
        if spec.density * spec.window ** spec.dim > MAX_API_POINTS:
            raise HTTPException(status_code=413, detail=f"window too large for the API (> {MAX_API_POINTS} points)")
        window = Window(dim=spec.dim, side=spec.window, pad=resolve_pad(spec, spec.window))
        seed = body.seed if body.seed is not None else spec.seed
        graph = realize(spec, window, seed)
    except HTTPException:
        raise
    except Exception as e:
        raise _http_error(e)
    inside = graph.cloud.inside(window.box)
    return _clean({
        "model": spec.label(),
        "seed": seed,
        "pad": graph.cloud.window.pad,
        "vertices": graph.vertex_count,
        "verticesInside": len(inside),
        "edges": graph.edge_count,
        "meanDegree": graph.mean_degree(window.box),
    })


@app.post("/tools/runExperiment")
async def run_experiment_endpoint(body: ExperimentRequest = Body(...)):
    """Run an experiment config synchronously and return its summary and fits."""
    try:
        config = parse_experiment_config(body.config)
        result = run_experiment(config, resume=body.resume)
    except Exception as e:
        raise _http_error(e)
    return _clean({
        "experiment": config.resolved_name,
        "directory": result.directory,
        "summaryCsv": result.summary_csv,
        "replicateCsv": result.replicate_csv,
        "fitCsv": result.fit_csv,
        "summary": result.summary,
        "fits": result.fits,
    })


@app.get("/health")
async def health():
    """Health check endpoint."""
    return {"status": "healthy", "version": __version__}


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
