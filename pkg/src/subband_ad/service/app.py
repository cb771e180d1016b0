"""HTTP service hosting the offline stub backends and a few core operations.

The ``/segment``, ``/prompt`` and ``/inpaint`` routes implement the backend
wire contract consumed by :class:`subband_ad.synthesis.HttpBackends`, so the
HTTP pipeline can run end to end without any foundation models.
"""

import binascii

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..metrics import MetricInputError, auroc
from ..synthesis import foreground_stub, inpaint_stub, prompt_stub, sample_rect_mask, select_candidate
from ..synthesis.backends import decode_image_b64, decode_mask_b64, encode_image_b64, encode_mask_b64
from ..synthesis.masks import MaskError
from ..tensor_io import TensorFormatError
from . import schemas


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app() -> FastAPI:
    app = FastAPI(title="subband-ad", version=__version__)

    @app.exception_handler(TensorFormatError)
    async def _bad_image(request, exc):
        return _error(400, f"bad image payload: {exc}")

    @app.exception_handler(binascii.Error)
    async def _bad_b64(request, exc):
        return _error(400, f"bad base64 payload: {exc}")

    @app.exception_handler(MaskError)
    async def _bad_mask(request, exc):
        return _error(422, str(exc))

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/segment", response_model=schemas.SegmentResponse)
    def segment(req: schemas.SegmentRequest):
        mask = foreground_stub(decode_image_b64(req.image))
        return {"mask": encode_mask_b64(mask)}

    @app.post("/prompt", response_model=schemas.PromptResponse, responses={422: {"model": schemas.ErrorResponse}})
    def prompt(req: schemas.PromptRequest):
        if not req.class_label:
            return _error(422, "empty class label")
        p = prompt_stub(req.class_label)
        return {"prompt": p.prompt, "negative_prompt": p.negative_prompt}

    @app.post("/inpaint", response_model=schemas.InpaintResponse, responses={422: {"model": schemas.ErrorResponse}})
    def inpaint(req: schemas.InpaintRequest):
        image = decode_image_b64(req.image)
        mask = decode_mask_b64(req.mask)
        if mask.shape != image.shape[-2:]:
            return _error(422, f"mask {mask.shape} does not match image {image.shape[-2:]}")
        return {"image": encode_image_b64(inpaint_stub(image, mask, req.seed))}

    @app.post("/select", response_model=schemas.SelectResponse)
    def select(req: schemas.SelectRequest):
        return {"index": select_candidate(req.distances, req.tau), "tau": req.tau}

    @app.post("/auroc", response_model=schemas.AurocResponse, responses={422: {"model": schemas.ErrorResponse}})
    def auroc_route(req: schemas.AurocRequest):
        try:
            return {"auroc": auroc(req.scores, req.labels)}
        except MetricInputError as exc:
            return _error(422, str(exc))

    @app.post("/genmask", response_model=schemas.MaskResponse)
    def genmask(req: schemas.MaskRequest):
        fg = decode_mask_b64(req.foreground)
        m, rect = sample_rect_mask(fg, req.alpha, req.aspect_range, np.random.default_rng(req.seed))
        return {"mask": encode_mask_b64(m), "area": int(m.sum()), "rect": rect.to_dict(), "seed": req.seed}

    return app


app = create_app()
