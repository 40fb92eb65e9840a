"""Service endpoints: one POST per scenario, JSON in, report out.

Error contract mirrors the CLI exit codes: 400 for usage errors (bad spec,
bad grid, incompatible bound selector), 409 for numerical failures
(uncertifiable truncation, eigensolver breakdown); bound violations are not
errors, they come back inside a 200 report with a nonempty violations array.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import __version__
from ..bounds import BoundConstants
from ..calculus import li_yau_quantity
from ..errors import (
    DomainError,
    HeatLabError,
    NumericalFailure,
    SpecParseError,
    TruncationError,
)
from ..grids import GridSpec, default_poles, parse_tgrid
from ..harness import (
    BOUND_NAMES,
    check_rows_to_csv,
    fit_sharp_constants,
    h3_counterexample_scan,
    h3scan_to_csv,
    product_additivity_check,
    report_to_json,
    run_check,
    sweep_sup_tY,
    sweep_to_csv,
    transfer_check,
)
from ..kernels import kernel_log_derivatives, kernel_value
from ..manifolds import parse_manifold
from ..spectral import validate_against_flat_torus
from . import schemas

# everything else under HeatLabError is a usage error (400)
_NUMERICAL_ERRORS = (TruncationError, NumericalFailure)

MANIFOLD_KINDS = ["euclidean", "circle", "flattorus", "sphere2", "h3",
                  "revtorus", "product"]
MANIFOLD_EXAMPLES = ["euclidean:n=3", "circle:L=6.2832",
                     "flattorus:L=6.2832,6.2832", "sphere2:r=1", "h3",
                     "revtorus:R=2,a=1", "product(circle:L=6.2832;euclidean:n=1)"]
COMMANDS = ["kernel", "check", "sweep", "counterexample", "product",
            "transfer", "fit", "validate"]
EXIT_CODES = {"pass": 0, "violation": 1, "usage": 2, "numerical": 3}


def create_app() -> FastAPI:
    app = FastAPI(title="heatlab", version=__version__,
                  description="Heat-kernel gradient-bound verification service")

    @app.exception_handler(HeatLabError)
    async def _heatlab_error(request: Request, exc: HeatLabError):
        kind = "numerical" if isinstance(exc, _NUMERICAL_ERRORS) else "usage"
        status = 409 if kind == "numerical" else 400
        return JSONResponse(status_code=status,
                            content={"error_kind": kind, "message": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.get("/catalog", response_model=schemas.CatalogResponse)
    def catalog():
        return schemas.CatalogResponse(
            version=__version__,
            manifold_kinds=MANIFOLD_KINDS,
            manifold_examples=MANIFOLD_EXAMPLES,
            bounds=list(BOUND_NAMES),
            commands=COMMANDS,
            default_constants=BoundConstants().as_dict(),
            exit_codes=EXIT_CODES)

    @app.post("/kernel", response_model=schemas.KernelResponse)
    def kernel(req: schemas.KernelRequest):
        m = parse_manifold(req.manifold)
        kv = kernel_value(m, req.x, req.t, req.y)
        ld = kernel_log_derivatives(m, req.x, req.t, req.y)
        ly = li_yau_quantity(ld, 1.0, req.t)
        return schemas.KernelResponse(
            manifold=req.manifold, x=req.x, y=req.y, t=req.t,
            value=kv.value, log_value=kv.log_value, tail_bound=kv.tail_bound,
            grad_ln=list(ld.grad_ln), grad_norm_sq=ld.grad_norm_sq,
            lap_ln=ld.lap_ln, dt_ln=ld.dt_ln, method=ld.method,
            error_estimate=ld.error_estimate, t_y=ly.t_y)

    @app.post("/check")
    def check(req: schemas.CheckRequest):
        m = parse_manifold(req.manifold)
        constants = _constants_from(req.constants)
        g = GridSpec(t_points=parse_tgrid(req.tgrid), space_resolution=req.res,
                     pole_set=default_poles(m, req.poles), window=req.window)
        report = run_check(m, g, req.bound, constants, alpha=req.alpha,
                           t0=req.t0, trials=req.trials, seed=req.seed,
                           fit=req.fit, want_csv=(req.format == "csv"))
        if req.format == "csv":
            return PlainTextResponse(check_rows_to_csv(report.csv_rows or []),
                                     media_type="text/csv")
        return JSONResponse(content=_loads(report_to_json(report.to_dict())))

    @app.post("/sweep")
    def sweep(req: schemas.SweepRequest):
        m = parse_manifold(req.manifold)
        g = GridSpec(t_points=parse_tgrid(req.tgrid), space_resolution=req.res,
                     pole_set=default_poles(m, req.poles), window=req.window)
        result = sweep_sup_tY(m, g, refine=req.refine)
        if req.format == "csv":
            return PlainTextResponse(sweep_to_csv(result), media_type="text/csv")
        return JSONResponse(content=_loads(report_to_json(result.to_dict())))

    @app.post("/counterexample")
    def counterexample(req: schemas.CounterexampleRequest):
        if not req.h3:
            raise DomainError("only the h3 counterexample scan is implemented")
        scan = h3_counterexample_scan(req.rmax, req.t, req.steps)
        if req.format == "csv":
            return PlainTextResponse(h3scan_to_csv(scan), media_type="text/csv")
        return JSONResponse(content=scan)

    @app.post("/product")
    def product(req: schemas.ProductRequest):
        m0 = parse_manifold(req.manifold)
        g = GridSpec(t_points=parse_tgrid(req.tgrid), space_resolution=req.res,
                     pole_set=default_poles(m0, 1))
        return JSONResponse(content=product_additivity_check(
            m0, g, points=req.points, seed=req.seed))

    @app.post("/transfer")
    def transfer(req: schemas.TransferRequest):
        m = parse_manifold(req.manifold)
        g = GridSpec(t_points=parse_tgrid(req.tgrid), space_resolution=req.res,
                     pole_set=default_poles(m, 1))
        return JSONResponse(content=transfer_check(m, trials=req.trials,
                                                   seed=req.seed, g=g))

    @app.post("/fit")
    def fit(req: schemas.FitRequest):
        m = parse_manifold(req.manifold)
        g = GridSpec(t_points=parse_tgrid(req.tgrid), space_resolution=req.res,
                     pole_set=default_poles(m, req.poles))
        return JSONResponse(content=fit_sharp_constants(m, g).to_dict())

    @app.post("/validate")
    def validate(req: schemas.ValidateRequest):
        report = validate_against_flat_torus(
            R=req.radius, a=req.a, grid_n=req.grid_n, n_eigs=req.n_eigs,
            refinement=req.refinement)
        report["schema"] = "heatlab-validate-v1"
        report["version"] = __version__
        return JSONResponse(content=report)

    return app


def _constants_from(d: dict | None) -> BoundConstants | None:
    if d is None:
        return None
    try:
        return BoundConstants(**d)
    except TypeError:
        known = ", ".join(BoundConstants().as_dict())
        bad = set(d) - set(BoundConstants().as_dict())
        raise SpecParseError(
            f"unknown constant override(s) {sorted(bad)}; known keys: {known}")


def _loads(s: str):
    import json
    return json.loads(s)


app = create_app()
