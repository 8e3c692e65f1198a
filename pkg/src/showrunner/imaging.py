"""Image and mesh plumbing: PNG codecs, procedural stand-in media, frieze
compositing, and the bounding-box placeholder preview for meshes.

Everything here is deterministic for fixed inputs; procedural generators are
keyed by content digests so replays reproduce byte-identical payloads.
"""

from __future__ import annotations

import hashlib
import io
import random

import numpy as np
from PIL import Image, ImageDraw

from .errors import FriezeTooLarge

PNG_COMPRESS_LEVEL = 0  # transient in-memory payloads; speed over size


def png_encode(image: Image.Image, compress_level: int = PNG_COMPRESS_LEVEL) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG", compress_level=compress_level)
    return buf.getvalue()


def png_decode(data: bytes) -> Image.Image:
    img = Image.open(io.BytesIO(data))
    img.load()
    return img


def png_dimensions(data: bytes) -> tuple[int, int]:
    with Image.open(io.BytesIO(data)) as img:
        if img.format != "PNG":
            raise ValueError(f"expected PNG, got {img.format}")
        return img.size


def is_png(data: bytes) -> bool:
    return data[:8] == b"\x89PNG\r\n\x1a\n"


def _digest_ints(key: str, count: int) -> list[int]:
    out = []
    h = hashlib.sha256(key.encode("utf-8")).digest()
    while len(out) < count:
        out.extend(h)
        h = hashlib.sha256(h).digest()
    return out[:count]


def procedural_image(width: int, height: int, key: str) -> bytes:
    """A digest-keyed gradient with a stripe overlay; distinct keys give
    visibly (and byte-wise) distinct images."""
    b = _digest_ints(key, 8)
    c0 = np.array(b[0:3], dtype=np.float32)
    c1 = np.array(b[3:6], dtype=np.float32)
    phase = b[6] / 255.0
    freq = 3 + b[7] % 5

    x = np.linspace(0.0, 1.0, width, dtype=np.float32)
    y = np.linspace(0.0, 1.0, height, dtype=np.float32)
    ramp = (freq * (x[None, :] + y[:, None]) + phase) % 1.0  # sawtooth stripes
    shade = (0.7 + 0.3 * ramp)[:, :, None]
    grad = c0[None, None, :] * (1 - x)[None, :, None] + c1[None, None, :] * x[None, :, None]
    rgb = (grad * shade).astype(np.uint8)
    return png_encode(Image.fromarray(rgb, mode="RGB"))


def procedural_sketch(width: int, height: int, seed: int) -> bytes:
    """A seeded doodle on white, standing in for an audience sketch."""
    rng = random.Random(seed)
    img = Image.new("RGB", (width, height), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    for _ in range(rng.randint(3, 7)):
        pts = [
            (rng.randint(0, width - 1), rng.randint(0, height - 1))
            for _ in range(rng.randint(3, 6))
        ]
        color = (rng.randint(0, 200), rng.randint(0, 200), rng.randint(0, 200))
        draw.line(pts, fill=color, width=rng.randint(2, 5))
    return png_encode(img)


def composite_frieze(
    background_png: bytes, frieze_png: bytes, seed: int, margin: int = 16
) -> tuple[bytes, int]:
    """Alpha-over the frieze at a seeded random x along the bottom edge.

    The frieze's bottom edge sits flush with the background's; x is uniform
    over [margin, bg_width - frieze_width - margin]. Background pixels outside
    the frieze rectangle are untouched. Returns (png_bytes, x).
    """
    bg = png_decode(background_png).convert("RGBA")
    frieze = png_decode(frieze_png).convert("RGBA")
    bw, bh = bg.size
    fw, fh = frieze.size
    if fw + 2 * margin > bw or fh > bh:
        raise FriezeTooLarge(
            f"frieze {fw}x{fh} with margin {margin} does not fit on {bw}x{bh}"
        )
    x = random.Random(seed).randint(margin, bw - fw - margin)
    y = bh - fh
    region = bg.crop((x, y, x + fw, y + fh))
    bg.paste(Image.alpha_composite(region, frieze), (x, y))
    return png_encode(bg), x


def unit_cube_obj(stamp: str) -> str:
    """A unit cube mesh in OBJ text, stamped with a provenance comment."""
    lines = [f"# stamp {stamp}", "o offering"]
    for xi in (0, 1):
        for yi in (0, 1):
            for zi in (0, 1):
                lines.append(f"v {xi:.1f} {yi:.1f} {zi:.1f}")
    # vertex order above: index = 4x + 2y + z + 1
    faces = [
        (1, 2, 4, 3),
        (5, 7, 8, 6),
        (1, 5, 6, 2),
        (3, 4, 8, 7),
        (1, 3, 7, 5),
        (2, 6, 8, 4),
    ]
    for quad in faces:
        lines.append("f " + " ".join(str(i) for i in quad))
    return "\n".join(lines) + "\n"


def obj_vertices(obj_text: str) -> list[tuple[float, float, float]]:
    verts = []
    for line in obj_text.splitlines():
        parts = line.split()
        if len(parts) >= 4 and parts[0] == "v":
            verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
    return verts


def mesh_bbox_preview(obj_text: str, size: int = 256) -> bytes:
    """Placeholder preview: the mesh's bounding box drawn as a wireframe."""
    verts = obj_vertices(obj_text)
    img = Image.new("RGB", (size, size), (24, 24, 32))
    draw = ImageDraw.Draw(img)
    if verts:
        xs, ys, zs = zip(*verts)
        corners = [
            (x, y, z)
            for x in (min(xs), max(xs))
            for y in (min(ys), max(ys))
            for z in (min(zs), max(zs))
        ]
        # fixed oblique projection, normalized into the canvas
        pts2 = [(x + 0.35 * z, -y - 0.25 * z) for x, y, z in corners]
        us = [p[0] for p in pts2]
        vs = [p[1] for p in pts2]
        span = max(max(us) - min(us), max(vs) - min(vs)) or 1.0
        pad = size * 0.15

        def to_px(p):
            u = pad + (p[0] - min(us)) / span * (size - 2 * pad)
            v = pad + (p[1] - min(vs)) / span * (size - 2 * pad)
            return (u, v)

        edges = [
            (a, b)
            for a in range(8)
            for b in range(a + 1, 8)
            if bin(a ^ b).count("1") == 1  # corner indices differing in one axis
        ]
        for a, b in edges:
            draw.line([to_px(pts2[a]), to_px(pts2[b])], fill=(120, 220, 200), width=2)
    draw.text((8, size - 18), "mesh preview", fill=(200, 200, 210))
    return png_encode(img)
