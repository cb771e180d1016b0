"""Segmentation, prompting and inpainting backends.

``StubBackends`` runs the deterministic offline stand-ins in-process.
``HttpBackends`` speaks the JSON wire contract (``/segment``, ``/prompt``,
``/inpaint``) with images carried as base64 netpbm.
"""

from __future__ import annotations

import base64

import httpx
import numpy as np

from ..tensor_io import (
    decode_netpbm,
    encode_netpbm,
    image_to_mask,
    image_to_tensor,
    mask_to_image,
    tensor_to_image,
)
from .masks import foreground_stub
from .pipeline import PromptSet, inpaint_stub, prompt_stub

BACKEND_URL_ENV = "SUBBAND_AD_BACKEND_URL"


class BackendError(RuntimeError):
    def __init__(self, backend: str, message: str, attempt: int | None = None):
        where = backend if attempt is None else f"{backend} (attempt {attempt})"
        super().__init__(f"{where}: {message}")
        self.backend = backend
        self.attempt = attempt


def encode_image_b64(image: np.ndarray) -> str:
    return base64.b64encode(encode_netpbm(tensor_to_image(image))).decode("ascii")


def decode_image_b64(data: str) -> np.ndarray:
    return image_to_tensor(decode_netpbm(base64.b64decode(data)))


def encode_mask_b64(mask: np.ndarray) -> str:
    return base64.b64encode(encode_netpbm(mask_to_image(mask))).decode("ascii")


def decode_mask_b64(data: str) -> np.ndarray:
    return image_to_mask(decode_netpbm(base64.b64decode(data)))


class StubBackends:
    """Offline, deterministic backends."""

    name = "stub"
    max_concurrency = 1

    def segment(self, image):
        return foreground_stub(image)

    def prompt(self, class_label):
        return prompt_stub(class_label)

    def inpaint(self, image, mask, prompts, seed, params, attempt=None):
        return inpaint_stub(image, mask, seed)


class HttpBackends:
    """Client for a service implementing the backend wire contract.

    ``client`` may be any ``httpx.Client`` (including FastAPI's TestClient);
    it must be safe to share across the worker threads used for inpainting.
    """

    name = "http"

    def __init__(self, base_url: str = "", client: httpx.Client | None = None, timeout: float = 120.0,
                 max_concurrency: int = 5):
        self.client = client if client is not None else httpx.Client(base_url=base_url, timeout=timeout)
        self.max_concurrency = max_concurrency

    def _post(self, backend: str, path: str, body: dict, attempt: int | None = None) -> dict:
        try:
            resp = self.client.post(path, json=body)
        except httpx.HTTPError as exc:
            raise BackendError(backend, f"transport failure: {exc}", attempt) from exc
        try:
            payload = resp.json()
        except ValueError:
            payload = {}
        if resp.status_code // 100 != 2:
            detail = payload.get("error") or payload.get("detail") or resp.text[:200]
            raise BackendError(backend, f"HTTP {resp.status_code}: {detail}", attempt)
        if "error" in payload and payload["error"]:
            raise BackendError(backend, str(payload["error"]), attempt)
        return payload

    def segment(self, image):
        payload = self._post("segment", "/segment", {"image": encode_image_b64(image)})
        return decode_mask_b64(payload["mask"])

    def prompt(self, class_label):
        payload = self._post("prompt", "/prompt", {"class_label": class_label})
        return PromptSet(payload["prompt"], payload["negative_prompt"])

    def inpaint(self, image, mask, prompts, seed, params, attempt=None):
        body = {
            "image": encode_image_b64(image),
            "mask": encode_mask_b64(mask),
            "prompt": prompts.prompt,
            "negative_prompt": prompts.negative_prompt,
            "seed": int(seed),
            **params,
        }
        payload = self._post("inpaint", "/inpaint", body, attempt)
        if "image" not in payload:
            raise BackendError("inpaint", "response has no image", attempt)
        return decode_image_b64(payload["image"])
