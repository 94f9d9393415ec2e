"""HTTP service exposing edit sessions to interactive clients.

All responses are JSON envelopes {"ok": bool, "data"|"error": ...};
images travel as base64 PNG. Requests against one session are
serialized by a per-session lock (painting is order-sensitive);
different sessions proceed in parallel. Previews are computed
synchronously -- edits are sub-second at session resolutions.
"""

from __future__ import annotations

import base64
import io
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel, Field

from .color import clamp_gamut, srgb_encode
from .core import NormalMap, RadianceImage, ReflectanceMap, render_sphere
from .edit import EditSession, Stroke, material_transfer, normal_paint, shape_reshade
from .pfm import PfmFormatError, read_pfm

MAX_UPLOAD_BYTES = 8 << 20
PREVIEW_MAX_SIDE = 512


def image_to_png_bytes(img: RadianceImage) -> bytes:
    """Display-referred linear floats -> sRGB-encoded 8-bit PNG bytes."""
    rgb = srgb_encode(clamp_gamut(img.rgb)) * 255.0
    data = np.round(rgb).astype(np.uint8)
    data[~img.mask] = 0
    # +t is up: flip rows for display
    pil = Image.fromarray(data[::-1])
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def normals_to_png_bytes(nm: NormalMap) -> bytes:
    data = np.round((nm.normals * 0.5 + 0.5) * 255.0).astype(np.uint8)
    data[~nm.mask] = 0
    buf = io.BytesIO()
    Image.fromarray(data[::-1]).save(buf, format="PNG")
    return buf.getvalue()


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


@dataclass
class SessionState:
    session: EditSession
    normal_maps: dict = field(default_factory=dict)
    rms: dict = field(default_factory=dict)
    next_id: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    def fresh_id(self, prefix: str) -> str:
        self.next_id += 1
        return f"{prefix}-{self.next_id}"


class StrokeModel(BaseModel):
    center: list[float] = Field(min_length=2, max_length=2)  # (row, col)
    radius: float = Field(gt=0)
    tilt: list[float] = Field(min_length=2, max_length=2)  # (dx, dy)
    angle: float
    strength: float = Field(ge=0.0, le=1.0, default=1.0)


class PaintRequest(BaseModel):
    normal_id: str = "base"
    strokes: list[StrokeModel] = []


class ReshadeRequest(BaseModel):
    normal_id: str


class TransferRequest(BaseModel):
    rm_id: str | None = None
    rm_pfm: str | None = None  # base64 PFM upload
    rm_mask_pfm: str | None = None


def _envelope(data, status: int = 200) -> JSONResponse:
    return JSONResponse({"ok": True, "data": data}, status_code=status)


def _error(message: str, status: int) -> JSONResponse:
    return JSONResponse({"ok": False, "error": message}, status_code=status)


def create_app(sessions: dict[str, EditSession], extra_rms: dict | None = None, static_dir=None) -> FastAPI:
    """Build the service around pre-loaded edit sessions.

    extra_rms maps rm ids to ReflectanceMaps offered for transfer across
    all sessions (the material gallery).
    """
    app = FastAPI(title="lumisphere-edit-service")
    gallery = dict(extra_rms or {})
    states: dict[str, SessionState] = {}
    for sid, sess in sessions.items():
        st = SessionState(sess)
        st.normal_maps["base"] = sess.normals
        st.rms["own"] = sess.rm
        states[sid] = st

    def get_state(sid: str) -> SessionState | None:
        return states.get(sid)

    @app.exception_handler(422)
    async def _unprocessable(request: Request, exc):  # pragma: no cover - fastapi wiring
        return _error(str(exc), 422)

    @app.get("/health")
    def health():
        return _envelope({"status": "up", "sessions": sorted(states)})

    @app.get("/session/{sid}")
    def session_info(sid: str):
        st = get_state(sid)
        if st is None:
            return _error(f"unknown session {sid!r}", 404)
        with st.lock:
            sess = st.session
            data = {
                "width": sess.image.width,
                "height": sess.image.height,
                "image_png": _b64(image_to_png_bytes(sess.image)),
                "normals_png": _b64(normals_to_png_bytes(sess.normals)),
                "rm_png": _b64(image_to_png_bytes(render_sphere(sess.rm, min(sess.rm.resolution * 4, 128)))),
                "normal_ids": sorted(st.normal_maps),
                "rm_ids": sorted(set(st.rms) | set(gallery)),
                "pfm_links": [f"/session/{sid}/rm.pfm"],
            }
        return _envelope(data)

    @app.get("/rm/{sid}/{rm_id}")
    def rm_thumbnail(sid: str, rm_id: str):
        st = get_state(sid)
        if st is None:
            return _error(f"unknown session {sid!r}", 404)
        with st.lock:
            rm = st.rms.get(rm_id) or gallery.get(rm_id)
            if rm is None:
                return _error(f"unknown reflectance map {rm_id!r}", 404)
            png = image_to_png_bytes(render_sphere(rm, min(rm.resolution * 4, 128)))
        return _envelope({"rm_id": rm_id, "rm_png": _b64(png)})

    @app.get("/session/{sid}/rm.pfm")
    def session_rm_pfm(sid: str):
        from fastapi.responses import Response

        st = get_state(sid)
        if st is None:
            return _error(f"unknown session {sid!r}", 404)
        import tempfile

        from .pfm import write_pfm

        with tempfile.NamedTemporaryFile(suffix=".pfm") as tmp:
            write_pfm(tmp.name, st.session.rm.radiance)
            tmp.seek(0)
            return Response(tmp.read(), media_type="application/octet-stream")

    @app.post("/paint/{sid}")
    def paint(sid: str, req: PaintRequest):
        st = get_state(sid)
        if st is None:
            return _error(f"unknown session {sid!r}", 404)
        with st.lock:
            nm = st.normal_maps.get(req.normal_id)
            if nm is None:
                return _error(f"unknown normal map {req.normal_id!r}", 404)
            try:
                for s in req.strokes:
                    stroke = Stroke(
                        center=(s.center[0], s.center[1]),
                        radius=s.radius,
                        tilt=(s.tilt[0], s.tilt[1]),
                        angle=s.angle,
                        strength=s.strength,
                    )
                    nm = normal_paint(nm, stroke)
            except ValueError as e:
                return _error(f"malformed stroke: {e}", 422)
            new_id = st.fresh_id("nm")
            st.normal_maps[new_id] = nm
        return _envelope({"normal_id": new_id})

    @app.post("/reshade/{sid}")
    def reshade(sid: str, req: ReshadeRequest):
        st = get_state(sid)
        if st is None:
            return _error(f"unknown session {sid!r}", 404)
        with st.lock:
            nm = st.normal_maps.get(req.normal_id)
            if nm is None:
                return _error(f"unknown normal map {req.normal_id!r}", 404)
            preview = shape_reshade(st.session, nm)
            png = image_to_png_bytes(preview)
        return _envelope({"preview_png": _b64(png)})

    @app.post("/transfer/{sid}")
    def transfer(sid: str, req: TransferRequest):
        st = get_state(sid)
        if st is None:
            return _error(f"unknown session {sid!r}", 404)
        with st.lock:
            if req.rm_pfm is not None:
                if len(req.rm_pfm) * 3 // 4 > MAX_UPLOAD_BYTES:
                    return _error("uploaded map exceeds the size limit", 413)
                import tempfile

                try:
                    payload = base64.b64decode(req.rm_pfm)
                    with tempfile.NamedTemporaryFile(suffix=".pfm", delete=False) as tmp:
                        tmp.write(payload)
                        tmp.flush()
                        data = read_pfm(tmp.name)
                    mask = np.ones(data.shape[:2], dtype=bool)
                    if req.rm_mask_pfm:
                        with tempfile.NamedTemporaryFile(suffix=".pfm", delete=False) as tmp:
                            tmp.write(base64.b64decode(req.rm_mask_pfm))
                            tmp.flush()
                            mask = read_pfm(tmp.name) > 0.5
                    rm = ReflectanceMap(np.clip(data, 0.0, None), mask)
                    rm_id = st.fresh_id("rm")
                    st.rms[rm_id] = rm
                except (PfmFormatError, ValueError) as e:
                    return _error(f"bad reflectance map upload: {e}", 422)
            elif req.rm_id is not None:
                rm = st.rms.get(req.rm_id) or gallery.get(req.rm_id)
                rm_id = req.rm_id
                if rm is None:
                    return _error(f"unknown reflectance map {req.rm_id!r}", 404)
            else:
                return _error("transfer needs rm_id or rm_pfm", 422)
            preview = material_transfer(st.session, rm)
            png = image_to_png_bytes(preview)
        return _envelope({"preview_png": _b64(png), "rm_id": rm_id})

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="studio")

    return app
