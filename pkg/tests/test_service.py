import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from subband_ad import __version__
from subband_ad.service import create_app
from subband_ad.synthesis import foreground_stub, inpaint_stub
from subband_ad.synthesis.backends import decode_image_b64, decode_mask_b64, encode_image_b64, encode_mask_b64


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200 and r.json() == {"status": "ok", "version": __version__}


def test_segment(client, square_image, square_mask):
    r = client.post("/segment", json={"image": encode_image_b64(square_image)})
    assert r.status_code == 200
    np.testing.assert_array_equal(decode_mask_b64(r.json()["mask"]), square_mask)


def test_segment_bad_payload(client):
    r = client.post("/segment", json={"image": base64.b64encode(b"P5 2 2 255\n\x00").decode()})
    assert r.status_code == 400 and "error" in r.json()
    r = client.post("/segment", json={"image": "!!!"})
    assert r.status_code == 400


def test_segment_constant_image(client):
    r = client.post("/segment", json={"image": encode_image_b64(np.full((1, 4, 4), 0.5, np.float32))})
    assert r.status_code == 422 and "constant" in r.json()["error"]


def test_prompt(client):
    r = client.post("/prompt", json={"class_label": "screw"})
    assert r.json()["negative_prompt"] == "pristine, flawless, perfect screw"
    assert client.post("/prompt", json={"class_label": ""}).status_code == 422


def test_inpaint_matches_local_stub(client, square_image, square_mask):
    body = {"image": encode_image_b64(square_image), "mask": encode_mask_b64(square_mask), "prompt": "p", "seed": 11}
    out = decode_image_b64(client.post("/inpaint", json=body).json()["image"])
    local = inpaint_stub(decode_image_b64(body["image"]), square_mask, 11)
    assert np.abs(out - local).max() <= 0.5 / 255 + 1e-7
    np.testing.assert_array_equal(out[:, ~square_mask], square_image[:, ~square_mask])


def test_inpaint_shape_mismatch(client, square_image):
    body = {"image": encode_image_b64(square_image), "mask": encode_mask_b64(np.ones((4, 4), bool)),
            "prompt": "p", "seed": 0}
    assert client.post("/inpaint", json=body).status_code == 422


def test_inpaint_rejects_negative_seed(client, square_image, square_mask):
    body = {"image": encode_image_b64(square_image), "mask": encode_mask_b64(square_mask), "prompt": "p", "seed": -1}
    assert client.post("/inpaint", json=body).status_code == 422


def test_select(client):
    r = client.post("/select", json={"distances": [0.05, 0.12, 0.31, 0.50, 0.90], "tau": 0.13})
    assert r.json() == {"index": 1, "tau": 0.13}
    assert client.post("/select", json={"distances": []}).status_code == 422


def test_auroc(client):
    r = client.post("/auroc", json={"scores": [0.1, 0.4, 0.35, 0.8], "labels": [0, 0, 1, 1]})
    assert r.json()["auroc"] == pytest.approx(0.75)
    r = client.post("/auroc", json={"scores": [0.1, 0.2], "labels": [0, 0]})
    assert r.status_code == 422


def test_genmask(client):
    fg = encode_mask_b64(np.ones((100, 100), bool))
    r = client.post("/genmask", json={"foreground": fg, "alpha": 0.1, "aspect_range": [1, 1], "seed": 3})
    body = r.json()
    assert r.status_code == 200 and body["seed"] == 3
    assert (body["rect"]["height"], body["rect"]["width"]) == (32, 32)
    assert decode_mask_b64(body["mask"]).sum() == body["area"]


def test_rgb_wire_roundtrip(square_image):
    rgb = np.repeat(square_image, 3, axis=0)
    np.testing.assert_array_equal(decode_image_b64(encode_image_b64(rgb)), rgb)
    np.testing.assert_array_equal(foreground_stub(rgb), foreground_stub(square_image))
