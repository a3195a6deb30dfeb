"""On-disk scene layout.

::

    <dir>/
      clean/view_{v}_{u}.png       16-bit RGB, value = round(x * 65535)
      degraded/view_{v}_{u}.png
      enhanced/view_{v}_{u}.png
      depth/depth_{v}_{u}.pfm      float32 little-endian (or .png + scale)
      camera.json
      degradation.json             only when parameters are known
      manifest.json                file index with SHA-256 per file

Only the light-field roles present in the bundle are written.  ``extras``
holds any further files (reports, disparity maps) as raw bytes keyed by
relative path; they are indexed like everything else.  The manifest
checksum is the SHA-256 of the sorted ``path:sha256`` lines, so it changes
whenever any indexed byte changes.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import png

from .degrade import DegradationParams
from .errors import (
    ChecksumMismatch,
    IncompleteBundle,
    IoFailure,
    MalformedManifest,
    MissingView,
)
from .lightfield import CameraRig, LightField, make_lightfield

FORMAT_NAME = "uwlf-scene"
FORMAT_VERSION = 1
ROLES = ("clean", "degraded", "enhanced")


@dataclass
class SceneBundle:
    rig: CameraRig
    lf_clean: LightField | None = None
    lf_degraded: LightField | None = None
    lf_enhanced: LightField | None = None
    depths: np.ndarray | None = None
    params: DegradationParams | None = None
    scene_meta: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.depths is not None:
            self.depths = np.asarray(self.depths, dtype=np.float32)

    def lightfield(self, role: str) -> LightField | None:
        return getattr(self, f"lf_{role}")

    def roles(self) -> list[str]:
        return [r for r in ROLES if self.lightfield(r) is not None]

    def primary(self) -> LightField:
        """Most processed light field present: enhanced, then degraded, then clean."""
        for role in reversed(ROLES):
            lf = self.lightfield(role)
            if lf is not None:
                return lf
        raise IncompleteBundle("bundle holds no light field")

    def check(self):
        roles = self.roles()
        if not roles:
            raise IncompleteBundle("bundle holds no light field")
        shape = self.lightfield(roles[0]).values.shape
        for r in roles[1:]:
            if self.lightfield(r).values.shape != shape:
                raise IncompleteBundle(f"{r} light field shape differs from {roles[0]}")
        if self.depths is not None and self.depths.shape != shape[:4]:
            raise IncompleteBundle(f"depth maps {self.depths.shape} do not match views {shape[:4]}")
        return shape


# -- primitive formats -----------------------------------------------------------

def write_png16(path, img):
    img = np.asarray(img, dtype=np.float64)
    q = np.round(np.clip(img, 0.0, 1.0) * 65535.0).astype(np.uint16)
    H, W = q.shape[:2]
    greyscale = q.ndim == 2
    writer = png.Writer(W, H, bitdepth=16, greyscale=greyscale, interlace=False, compression=6)
    rows = q.reshape(H, -1)
    with open(path, "wb") as f:
        writer.write(f, rows.tolist())


def read_png16(path) -> np.ndarray:
    try:
        w, h, rows, info = png.Reader(filename=str(path)).asDirect()
        arr = np.array([np.asarray(r, dtype=np.uint16) for r in rows])
    except png.Error as exc:
        raise MalformedManifest(f"{path}: unreadable PNG ({exc})") from exc
    planes = info["planes"]
    if info["bitdepth"] != 16:
        raise MalformedManifest(f"{path}: expected a 16-bit PNG")
    if planes == 1:
        return arr.reshape(h, w)
    return arr.reshape(h, w, planes)


def encode_pfm(data) -> bytes:
    data = np.asarray(data, dtype="<f4")
    color = data.ndim == 3
    H, W = data.shape[:2]
    header = f"{'PF' if color else 'Pf'}\n{W} {H}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(data[::-1]).tobytes()


def decode_pfm(raw: bytes, name="<bytes>") -> np.ndarray:
    f = io.BytesIO(raw)
    tag = f.readline().strip()
    if tag not in (b"PF", b"Pf"):
        raise MalformedManifest(f"{name}: not a PFM file")
    try:
        dims = f.readline().split()
        W, H = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
    except (IndexError, ValueError) as exc:
        raise MalformedManifest(f"{name}: bad PFM header") from exc
    dtype = "<f4" if scale < 0 else ">f4"
    channels = 3 if tag == b"PF" else 1
    data = np.frombuffer(f.read(), dtype=dtype)
    if data.size != W * H * channels:
        raise MalformedManifest(f"{name}: truncated PFM payload")
    shape = (H, W, 3) if channels == 3 else (H, W)
    return data.reshape(shape)[::-1].astype(np.float32)


def write_pfm(path, data):
    with open(path, "wb") as f:
        f.write(encode_pfm(data))


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_pfm(f.read(), str(path))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def content_checksum(files: dict) -> str:
    lines = "".join(f"{k}:{files[k]}\n" for k in sorted(files))
    return hashlib.sha256(lines.encode("utf-8")).hexdigest()


def write_json(path, data):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def camera_json(rig: CameraRig, angular) -> dict:
    V, U = angular
    vc, uc = (V - 1) // 2, (U - 1) // 2
    views = []
    for v in range(V):
        for u in range(U):
            views.append({
                "index": [v, u],
                "location": [(u - uc) * rig.baseline, (v - vc) * rig.baseline, 0.0],
                "rotation": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            })
    out = rig.to_dict()
    out["angular"] = [V, U]
    out["views"] = views
    return out


# -- bundle I/O ------------------------------------------------------------------

def save_scene(bundle: SceneBundle, directory, depth_format: str = "pfm") -> dict:
    """Write ``bundle`` into ``directory``; returns the manifest dictionary."""
    shape = bundle.check()
    V, U, H, W, _ = shape
    if depth_format not in ("pfm", "png16"):
        raise ValueError("depth_format must be 'pfm' or 'png16'")
    root = Path(directory)
    try:
        root.mkdir(parents=True, exist_ok=True)
        files = {}
        for role in bundle.roles():
            (root / role).mkdir(exist_ok=True)
            lf = bundle.lightfield(role)
            for v in range(V):
                for u in range(U):
                    rel = f"{role}/view_{v}_{u}.png"
                    write_png16(root / rel, lf.values[v, u])
                    files[rel] = sha256_file(root / rel)
        depth_scale = None
        if bundle.depths is not None:
            (root / "depth").mkdir(exist_ok=True)
            if depth_format == "png16":
                depth_scale = float(bundle.depths.max()) / 65535.0 or 1.0
            for v in range(V):
                for u in range(U):
                    if depth_format == "pfm":
                        rel = f"depth/depth_{v}_{u}.pfm"
                        write_pfm(root / rel, bundle.depths[v, u])
                    else:
                        rel = f"depth/depth_{v}_{u}.png"
                        write_png16(root / rel, bundle.depths[v, u] / (depth_scale * 65535.0))
                    files[rel] = sha256_file(root / rel)
        for rel in sorted(bundle.extras):
            if rel in files or rel in ("camera.json", "degradation.json", "manifest.json"):
                raise IncompleteBundle(f"extra file {rel} collides with a bundle file")
            (root / rel).parent.mkdir(parents=True, exist_ok=True)
            (root / rel).write_bytes(bundle.extras[rel])
            files[rel] = sha256_file(root / rel)
        write_json(root / "camera.json", camera_json(bundle.rig, (V, U)))
        files["camera.json"] = sha256_file(root / "camera.json")
        if bundle.params is not None:
            write_json(root / "degradation.json", bundle.params.to_dict())
            files["degradation.json"] = sha256_file(root / "degradation.json")
        manifest = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "angular": [V, U],
            "spatial": [H, W],
            "roles": bundle.roles(),
            "depth_format": None if bundle.depths is None else depth_format,
            "depth_scale": depth_scale,
            "scene": bundle.scene_meta,
            "config": bundle.config,
            "files": dict(sorted(files.items())),
            "checksum": content_checksum(files),
        }
        write_json(root / "manifest.json", manifest)
    except OSError as exc:
        raise IoFailure(f"cannot write scene to {root}: {exc}") from exc
    return manifest


def read_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.is_file():
        raise MissingView(f"{path} not found")
    try:
        with open(path, encoding="utf-8") as f:
            manifest = json.load(f)
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    required = ("format", "version", "angular", "spatial", "roles", "files", "checksum")
    missing = [k for k in required if k not in manifest]
    if missing or manifest.get("format") != FORMAT_NAME:
        raise MalformedManifest(f"{path}: not a {FORMAT_NAME} manifest (missing {missing})")
    if manifest["version"] != FORMAT_VERSION:
        raise MalformedManifest(f"{path}: unsupported version {manifest['version']}")
    V, U = manifest["angular"]
    if V % 2 == 0 or U % 2 == 0 or V < 1 or U < 1:
        raise MalformedManifest(f"{path}: angular grid {V}x{U} must be odd")
    return manifest


def load_scene(directory, verify: bool = True) -> SceneBundle:
    """Read a scene written by :func:`save_scene`, checking completeness and checksums."""
    root = Path(directory)
    manifest = read_manifest(root)
    V, U = manifest["angular"]
    files = manifest["files"]

    for role in manifest["roles"]:
        for v in range(V):
            for u in range(U):
                rel = f"{role}/view_{v}_{u}.png"
                if rel not in files or not (root / rel).is_file():
                    raise MissingView(f"missing {role} view ({v}, {u}): {rel}", index=(v, u))
    for rel in files:
        if not (root / rel).is_file():
            raise MissingView(f"missing file {rel}")
    if verify:
        if content_checksum(files) != manifest["checksum"]:
            raise ChecksumMismatch("manifest checksum does not match its file index")
        for rel, digest in files.items():
            if sha256_file(root / rel) != digest:
                raise ChecksumMismatch(f"{rel} does not match its recorded checksum")

    lfs = {}
    for role in manifest["roles"]:
        views = [[read_png16(root / f"{role}/view_{v}_{u}.png") for u in range(U)] for v in range(V)]
        lfs[role] = make_lightfield(np.array(views, dtype=np.float64) / 65535.0)

    depths = None
    fmt = manifest.get("depth_format")
    if fmt == "pfm":
        depths = np.array([[read_pfm(root / f"depth/depth_{v}_{u}.pfm") for u in range(U)] for v in range(V)])
    elif fmt == "png16":
        scale = float(manifest["depth_scale"])
        depths = np.array([[read_png16(root / f"depth/depth_{v}_{u}.png").astype(np.float64) * scale
                            for u in range(U)] for v in range(V)], dtype=np.float32)

    known = {"camera.json", "degradation.json"}
    extras = {}
    for rel in files:
        top = rel.split("/", 1)[0]
        if rel not in known and top not in ROLES and top != "depth":
            extras[rel] = (root / rel).read_bytes()

    try:
        with open(root / "camera.json", encoding="utf-8") as f:
            rig = CameraRig.from_dict(json.load(f))
        params = None
        if (root / "degradation.json").is_file():
            with open(root / "degradation.json", encoding="utf-8") as f:
                params = DegradationParams.from_dict(json.load(f))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise MalformedManifest(f"bad camera or degradation file: {exc}") from exc

    return SceneBundle(
        rig=rig,
        lf_clean=lfs.get("clean"),
        lf_degraded=lfs.get("degraded"),
        lf_enhanced=lfs.get("enhanced"),
        depths=depths,
        params=params,
        scene_meta=manifest.get("scene") or {},
        config=manifest.get("config") or {},
        extras=extras,
    )


def scene_exists(directory) -> bool:
    return os.path.isfile(os.path.join(directory, "manifest.json"))
