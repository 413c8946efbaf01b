"""HTTP service: submit edit jobs, poll status, fetch artifacts.

Jobs are content-addressed: resubmitting an identical request (same inputs,
same seed) returns the existing job instead of recomputing. Uploads are
never mutated; artifacts are written once.
"""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, Form, HTTPException, UploadFile
from fastapi.responses import JSONResponse, Response
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from ..conditioning import StrokeMap, intake_stroke_map
from ..imaging.types import Image, Mask
from ..maskops import KeypointSet, SegMap
from .config import PipelineConfig, load_models
from .jobs import JobStore
from .request import EditRequest, EditResult, ModelBundle, SamplingSettings, request_fingerprint
from .stages import StageError, edit, make_color_stage_inputs


class BadUpload(Exception):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail


def _error(code: str, detail: str, status: int = 400) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "detail": detail}}
    )


async def _read_upload(part: UploadFile | None) -> bytes | None:
    if part is None:
        return None
    data = await part.read()
    return data if data else None


def _decode_image(data: bytes, what: str) -> Image:
    try:
        with PILImage.open(io.BytesIO(data)) as pil:
            arr = np.asarray(pil.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise BadUpload("bad_png", f"{what}: {exc}") from exc
    return Image(arr.astype(np.float32) / 255.0)


def _decode_rgba(data: bytes, what: str) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(data)) as pil:
            arr = np.asarray(pil.convert("RGBA"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise BadUpload("bad_png", f"{what}: {exc}") from exc
    return arr.astype(np.float32) / 255.0


def _decode_mask(data: bytes, what: str) -> Mask:
    try:
        with PILImage.open(io.BytesIO(data)) as pil:
            arr = np.asarray(pil.convert("L"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise BadUpload("bad_png", f"{what}: {exc}") from exc
    return Mask((arr >= 128).astype(np.uint8))


def _decode_segmap(png: bytes, labels_json: bytes) -> SegMap:
    try:
        with PILImage.open(io.BytesIO(png)) as pil:
            if pil.mode != "P":
                raise BadUpload("bad_segmap", f"segmap must be indexed PNG, got {pil.mode}")
            labels = np.asarray(pil).astype(np.int32)
    except (UnidentifiedImageError, OSError) as exc:
        raise BadUpload("bad_png", f"segmap: {exc}") from exc
    try:
        mapping = json.loads(labels_json.decode())
        label_set = [mapping[str(i)] for i in range(len(mapping))]
        return SegMap(labels=labels, label_set=label_set)
    except (ValueError, KeyError) as exc:
        raise BadUpload("bad_segmap", f"labels sidecar: {exc}") from exc


def _decode_keypoints(data: bytes) -> KeypointSet:
    try:
        payload = json.loads(data.decode())
        pts = np.asarray(payload["points"], dtype=np.float64)
        rng = tuple(payload["eyebrow_range"])
        return KeypointSet(points=pts, eyebrow_range=rng)
    except (ValueError, KeyError, TypeError) as exc:
        raise BadUpload("bad_keypoints", str(exc)) from exc


def _png_bytes(img: Image) -> bytes:
    arr = np.round(img.data * 255.0).astype(np.uint8)
    pil = (
        PILImage.fromarray(arr[:, :, 0], mode="L")
        if arr.shape[2] == 1
        else PILImage.fromarray(arr, mode="RGB")
    )
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def _mask_png_bytes(mask: Mask) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(mask.data * 255, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _write_result_artifacts(
    store: JobStore, job_id: str, result: EditResult, stroke: StrokeMap | None
) -> None:
    store.write_artifact(job_id, "output.png", _png_bytes(result.output))
    if result.style_proxy is not None:
        store.write_artifact(
            job_id, "style_proxy.png", _png_bytes(result.style_proxy.image)
        )
        store.write_artifact(
            job_id, "style_proxy_hair.png", _mask_png_bytes(result.style_proxy.hair_mask)
        )
    if result.color_proxy is not None:
        store.write_artifact(
            job_id, "color_proxy.png", _png_bytes(result.color_proxy.image)
        )
    store.write_artifact(job_id, "agnostic_mask.png", _mask_png_bytes(result.agnostic_mask))
    store.write_artifact(job_id, "color_mask.png", _mask_png_bytes(result.color_mask))
    store.write_artifact(job_id, "restore_mask.png", _mask_png_bytes(result.restore_mask))
    if stroke is not None:
        store.write_artifact(job_id, "stroke_mask.png", _mask_png_bytes(stroke.painted_mask()))
    manifest = {
        "artifacts": store.list_artifacts(job_id),
        "metrics": result.metrics.as_dict() if result.metrics else None,
        "provenance": result.provenance,
    }
    store.write_artifact(
        job_id, "result.json", json.dumps(manifest, indent=2, sort_keys=True).encode()
    )


def make_app(
    cfg: PipelineConfig,
    models: ModelBundle | None = None,
    store: JobStore | None = None,
) -> FastAPI:
    bundle = models if models is not None else load_models(cfg)
    job_store = store if store is not None else JobStore(cfg.jobs_dir)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.executor = ThreadPoolExecutor(max_workers=cfg.workers)
        yield
        app.state.executor.shutdown(wait=True)

    app = FastAPI(title="hairlab", lifespan=lifespan)

    def run_job(job_id: str, req: EditRequest, stroke: StrokeMap | None) -> None:
        try:
            job_store.set_status(job_id, "running")
            result = edit(req, bundle)
            _write_result_artifacts(job_store, job_id, result, stroke)
            job_store.set_status(job_id, "done")
        except (StageError, Exception) as exc:  # noqa: BLE001 - job boundary
            job_store.set_status(job_id, "error", error=str(exc))

    async def build_request(
        source: UploadFile,
        segmap: UploadFile,
        segmap_labels: UploadFile,
        keypoints: UploadFile,
        stroke: UploadFile | None,
        style_ref: UploadFile | None,
        color_ref: UploadFile | None,
        color_ref_hair: UploadFile | None,
        params: str,
        pose: UploadFile | None = None,
    ) -> EditRequest:
        try:
            opts = json.loads(params) if params else {}
        except ValueError as exc:
            raise BadUpload("bad_params", str(exc)) from exc
        src = _decode_image(await source.read(), "source")
        seg = _decode_segmap(await segmap.read(), await segmap_labels.read())
        kp = _decode_keypoints(await keypoints.read())
        pose_img = None
        raw = await _read_upload(pose)
        if raw is not None:
            pose_img = _decode_image(raw, "pose")
        stroke_map = None
        raw = await _read_upload(stroke)
        if raw is not None:
            stroke_map = intake_stroke_map(
                _decode_rgba(raw, "stroke"), (src.height, src.width)
            )
        ref_img = None
        raw = await _read_upload(style_ref)
        if raw is not None:
            ref_img = _decode_image(raw, "style_ref")
        cref = None
        cref_hair = None
        raw = await _read_upload(color_ref)
        if raw is not None:
            cref = _decode_image(raw, "color_ref")
            raw_hair = await _read_upload(color_ref_hair)
            if raw_hair is None:
                raise BadUpload("bad_request", "color_ref requires color_ref_hair")
            cref_hair = _decode_mask(raw_hair, "color_ref_hair")
        try:
            sampling = SamplingSettings(
                steps=int(opts.get("steps", cfg.steps)),
                guidance=float(opts.get("guidance", cfg.guidance)),
                tau_fraction=float(opts.get("tau_fraction", cfg.tau_fraction)),
                blend_window=int(opts.get("blend_window", cfg.blend_window)),
                seed=int(opts.get("seed", 0)),
            )
            return EditRequest(
                source=src,
                segmap=seg,
                keypoints=kp,
                pose_prior=pose_img,
                style_text=opts.get("style_text"),
                color_text=opts.get("color_text"),
                style_ref=ref_img,
                color_ref=cref,
                color_ref_hair=cref_hair,
                stroke=stroke_map,
                reconstruction=bool(opts.get("reconstruction", False)),
                sampling=sampling,
            )
        except ValueError as exc:
            raise BadUpload("bad_request", str(exc)) from exc

    @app.post("/v1/edits", status_code=202)
    async def submit_edit(
        source: UploadFile,
        segmap: UploadFile,
        segmap_labels: UploadFile,
        keypoints: UploadFile,
        stroke: UploadFile | None = None,
        style_ref: UploadFile | None = None,
        color_ref: UploadFile | None = None,
        color_ref_hair: UploadFile | None = None,
        pose: UploadFile | None = None,
        params: str = Form("{}"),
    ):
        try:
            req = await build_request(
                source, segmap, segmap_labels, keypoints,
                stroke, style_ref, color_ref, color_ref_hair, params,
                pose=pose,
            )
        except BadUpload as exc:
            return _error(exc.code, exc.detail)
        job_id, created = job_store.create(request_fingerprint(req))
        if created:
            app.state.executor.submit(run_job, job_id, req, req.stroke)
        return {"job_id": job_id}

    @app.get("/v1/edits/{job_id}")
    async def job_status(job_id: str):
        try:
            record = job_store.status(job_id)
        except KeyError:
            return _error("unknown_job", job_id, status=404)
        payload = {"job_id": job_id, **record}
        if record["status"] == "done":
            manifest = json.loads(
                job_store.artifact_path(job_id, "result.json").read_text()
            )
            payload["result"] = manifest
        return payload

    @app.get("/v1/edits/{job_id}/artifacts/{name}")
    async def job_artifact(job_id: str, name: str):
        try:
            path = job_store.artifact_path(job_id, name)
        except KeyError:
            return _error("unknown_artifact", f"{job_id}/{name}", status=404)
        media = "application/json" if name.endswith(".json") else "image/png"
        return Response(content=path.read_bytes(), media_type=media)

    @app.post("/v1/proxies/color")
    async def preview_color_proxy(
        source: UploadFile,
        segmap: UploadFile,
        segmap_labels: UploadFile,
        keypoints: UploadFile,
        stroke: UploadFile | None = None,
        color_ref: UploadFile | None = None,
        color_ref_hair: UploadFile | None = None,
        params: str = Form("{}"),
    ):
        try:
            opts = json.loads(params) if params else {}
            opts["reconstruction"] = True  # allow stroke-less previews
            req = await build_request(
                source, segmap, segmap_labels, keypoints,
                stroke, None, color_ref, color_ref_hair, json.dumps(opts),
            )
        except BadUpload as exc:
            return _error(exc.code, exc.detail)
        inputs = make_color_stage_inputs(req, None, bundle)
        if inputs.proxy is None:
            return _error("no_color_source", "need a stroke or color reference")
        return Response(content=_png_bytes(inputs.proxy.image), media_type="image/png")

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "workers": cfg.workers, "models": bundle.checksums()}

    return app
