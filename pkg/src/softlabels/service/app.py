"""HTTP wiring for the elicitation service.

Thin adapter over ``core``: routes translate between HTTP and the
SessionManager, and every ServiceError maps to its status code with a
JSON body. Static image bytes are served from a directory configured at
app-construction time.
"""

from __future__ import annotations

from datetime import timedelta
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse

from ..labels import LabelSpace
from .core import (
    AnnotationStore,
    DEFAULT_TTL_MINUTES,
    ServiceError,
    SessionManager,
    load_batch_plans,
)


def create_app(
    manager: SessionManager,
    images_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="soft-label elicitation service")
    images_root = Path(images_dir) if images_dir is not None else None
    ui_root = Path(ui_dir).resolve() if ui_dir is not None else None

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"error": str(exc)})

    @app.get("/api/session")
    def new_session(annotator_id: str = ""):
        session = manager.create_session(annotator_id)
        return session.to_public_dict()

    @app.post("/api/session/{session_id}/annotations")
    async def submit(session_id: str, request: Request):
        try:
            payload = await request.json()
        except Exception:
            raise ServiceError("request body must be JSON") from None
        return manager.submit_annotations(session_id, payload)

    @app.get("/api/export")
    def export(batch_id: str | None = None):
        return PlainTextResponse(
            manager.export_jsonl(batch_id), media_type="application/x-ndjson"
        )

    @app.get("/images/{image_id}")
    def image(image_id: str):
        if images_root is None:
            return JSONResponse(
                status_code=404, content={"error": "no image directory configured"}
            )
        if "/" in image_id or image_id in (".", ".."):
            return JSONResponse(status_code=404, content={"error": "not found"})
        for candidate in (
            images_root / image_id,
            images_root / f"{image_id}.png",
            images_root / f"{image_id}.jpg",
        ):
            if candidate.is_file():
                return FileResponse(candidate)
        return JSONResponse(status_code=404, content={"error": "not found"})

    # Optional same-origin hosting of the annotation UI, so the browser
    # client needs no CORS setup: / serves its entry page and /dist/* the
    # compiled assets.
    def _ui_file(relative: str):
        if ui_root is None:
            return JSONResponse(
                status_code=404, content={"error": "no UI directory configured"}
            )
        candidate = (ui_root / relative).resolve()
        if not candidate.is_relative_to(ui_root) or not candidate.is_file():
            return JSONResponse(status_code=404, content={"error": "not found"})
        return FileResponse(candidate)

    @app.get("/", include_in_schema=False)
    def ui_index():
        return _ui_file("index.html")

    @app.get("/dist/{asset:path}", include_in_schema=False)
    def ui_asset(asset: str):
        return _ui_file(f"dist/{asset}")

    return app


def build_service(
    space: LabelSpace,
    batch_plan_path: str | Path,
    data_dir: str | Path,
    seed: int = 0,
    ttl_minutes: float = DEFAULT_TTL_MINUTES,
    images_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> tuple[FastAPI, SessionManager]:
    """Assemble the app from its file-level configuration."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    manager = SessionManager(
        plans=load_batch_plans(batch_plan_path),
        space=space,
        store=AnnotationStore(data_dir / "annotations.jsonl"),
        seed=seed,
        ttl=timedelta(minutes=ttl_minutes),
    )
    if images_dir is None:
        candidate = data_dir / "images"
        images_dir = candidate if candidate.is_dir() else None
    return create_app(manager, images_dir, ui_dir), manager
