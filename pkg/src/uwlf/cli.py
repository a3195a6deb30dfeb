"""Command-line front end.

::

    uwlf generate --out DIR [--seed 7] [--size 128] [--angular 5] [--spec scene.json]
    uwlf degrade IN --out DIR [--preset blue] [--sigma 0] [--seed 0]
    uwlf enhance IN --out DIR [--stages 3] [--oracle]   (oracle: recorded params and depths)
    uwlf eval RESULT REFERENCE [--role enhanced] [--csv FILE]
    uwlf refocus IN --out IMAGE.png (--slope S | --depth D)

Every subcommand accepts ``--config FILE``: a JSON object whose keys are
option names (``stages``, ``t_min``, ...).  Explicit flags win over the
file, the file wins over built-in defaults, and the merged result is stored
under ``config`` in the output manifest.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 the attenuation fit
fell back to beta = 0 (the output is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    SceneBundle,
    decode_pfm,
    encode_pfm,
    load_scene,
    save_scene,
    write_png16,
)
from .degrade import PRESETS, DegradationParams, degrade, sample_preset
from .disparity import DisparityConfig
from .enhance import EnhanceConfig, progressive_enhance
from .errors import (
    ChecksumMismatch,
    IncompleteBundle,
    IoFailure,
    MalformedManifest,
    MissingView,
    UwlfError,
)
from .lightfield import (
    CameraRig,
    DisparityMap,
    disparity_from_depth,
    recenter_zero_parallax,
    refocus,
)
from .metrics import evaluate
from .scene import SceneSpec, random_scene_spec, render_lf, scene_depth_range

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FALLBACK = 4

# the dataset keeps disparities within this many pixels per view
DISPARITY_BUDGET = 3.0

DEFAULTS = {
    "generate": {
        "seed": 7, "size": 128, "angular": 5, "difficulty": "standard", "spec": None,
        "focal_length": 35.0, "sensor_size": 32.0, "baseline": None, "zero_parallax": None,
        "max_disparity": 2.5, "depth_format": "pfm",
    },
    "degrade": {
        "preset": "blue", "sigma": 0.0, "seed": 0, "beta": None, "light": None, "recenter": None,
    },
    "enhance": {
        "stages": 3, "t_min": 0.05, "far_percentile": 0.01, "beta_fit": "robust-trimmed",
        "d_min": -4.0, "d_max": 4.0, "step": 0.1, "oracle": False,
    },
    "eval": {"role": None, "csv": None},
    "refocus": {"slope": None, "depth": None, "role": None},
}


class ConfigError(Exception):
    pass


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _json_error(path, exc):
    return ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _json_error(path, exc) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1:1: config must be a JSON object")
    return data


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    known = DEFAULTS[command]
    conf = dict(known)
    if getattr(args, "config", None):
        data = load_config_file(args.config)
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"{args.config}: unknown option(s) for {command}: {', '.join(unknown)}")
        conf.update(data)
    for key in known:
        value = getattr(args, key, None)
        if value is not None:
            conf[key] = value
    return conf


def _manifest_checksum(directory) -> str:
    with open(Path(directory) / "manifest.json", encoding="utf-8") as f:
        return json.load(f)["checksum"]


def _center_gt(bundle: SceneBundle):
    if bundle.depths is None:
        return None
    V, U = bundle.depths.shape[:2]
    depth = bundle.depths[(V - 1) // 2, (U - 1) // 2].astype(np.float64)
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        return None
    gt = disparity_from_depth(bundle.rig, depth)
    return DisparityMap(gt.values - bundle.rig.zero_parallax, gt.valid)


# -- generate ---------------------------------------------------------------------

def _load_spec(path) -> SceneSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read scene spec {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _json_error(path, exc) from exc
    try:
        return SceneSpec.from_dict(data)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{path}:1:1: invalid scene spec: {exc}") from exc


def _rig(conf, lo, hi, resolution) -> CameraRig:
    unit = conf["focal_length"] * resolution / conf["sensor_size"]
    if conf["baseline"] is None:
        span = unit * (1.0 / lo - 1.0 / hi)
        baseline = 2.0 * conf["max_disparity"] / span
    else:
        baseline = conf["baseline"]
    zp = conf["zero_parallax"]
    if zp is None:
        zp = 0.5 * unit * baseline * (1.0 / lo + 1.0 / hi)
    return CameraRig(conf["focal_length"], baseline, conf["sensor_size"], resolution, zp)


def cmd_generate(args) -> int:
    conf = resolve("generate", args)
    if conf["angular"] < 1 or conf["angular"] % 2 == 0:
        raise ConfigError("--angular must be a positive odd number")
    if conf["spec"]:
        spec = _load_spec(conf["spec"])
    else:
        spec = random_scene_spec(conf["seed"], conf["size"], conf["size"], conf["difficulty"])
    lo, hi = scene_depth_range(spec)
    rig = _rig(conf, lo, hi, spec.width)
    d_near = rig.disparity_scale / lo - rig.zero_parallax
    d_far = rig.disparity_scale / hi - rig.zero_parallax
    if max(abs(d_near), abs(d_far)) > DISPARITY_BUDGET:
        _warn(f"disparity range [{d_far:.3f}, {d_near:.3f}] px exceeds the [-3, 3] pixel budget")
    n = conf["angular"]
    lf, depths = render_lf(spec, rig, (n, n))
    bundle = SceneBundle(rig=rig, lf_clean=lf, depths=depths,
                         scene_meta={"name": spec.name, "seed": spec.seed, "layers": len(spec.layers),
                                     "spec": spec.to_dict()},
                         config={"command": "generate", **conf})
    save_scene(bundle, args.out, depth_format=conf["depth_format"])
    print(f"{spec.name}: {len(spec.layers)} layers, {n}x{n} views of {spec.height}x{spec.width}, "
          f"depth [{lo:.4f}, {hi:.4f}], disparity [{d_far:.4f}, {d_near:.4f}] px")
    return EXIT_OK


# -- degrade ----------------------------------------------------------------------

def cmd_degrade(args) -> int:
    conf = resolve("degrade", args)
    if conf["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {conf['preset']!r}; expected one of {sorted(PRESETS)}")
    bundle = load_scene(args.input)
    if bundle.lf_clean is None or bundle.depths is None:
        raise MissingView(f"{args.input} holds no clean views with depth")
    if (conf["beta"] is None) != (conf["light"] is None):
        raise ConfigError("--beta and --light must be given together")
    if conf["beta"] is not None:
        params = DegradationParams(tuple(conf["beta"]), tuple(conf["light"]), conf["sigma"], conf["seed"])
    else:
        params = sample_preset(conf["preset"], conf["seed"], conf["sigma"])
    degraded = degrade(bundle.lf_clean, bundle.depths, params)
    rig = bundle.rig
    clean = bundle.lf_clean
    if conf["recenter"] is not None:
        shift = float(conf["recenter"])
        degraded = recenter_zero_parallax(degraded, shift)
        clean = recenter_zero_parallax(clean, shift)
        rig = CameraRig(rig.focal_length, rig.baseline, rig.sensor_size, rig.resolution, rig.zero_parallax + shift)
    out = SceneBundle(rig=rig, lf_clean=clean, lf_degraded=degraded, depths=bundle.depths, params=params,
                      scene_meta=bundle.scene_meta,
                      config={"command": "degrade", **conf, "input_checksum": _manifest_checksum(args.input),
                              "upstream": bundle.config})
    save_scene(out, args.out)
    center = degraded.center_view
    print(f"degraded with beta={params.beta} A={params.background_light} sigma={params.noise_sigma}; "
          f"center mean {center.mean():.4f}")
    return EXIT_OK


# -- enhance ----------------------------------------------------------------------

def cmd_enhance(args) -> int:
    conf = resolve("enhance", args)
    if conf["stages"] < 1:
        raise ConfigError("--stages must be >= 1")
    bundle = load_scene(args.input)
    if bundle.lf_degraded is None:
        raise MissingView(f"{args.input} holds no degraded views")
    override = oracle_depths = None
    if conf["oracle"]:
        if bundle.params is None:
            raise ConfigError("--oracle needs degradation.json in the input scene")
        override = bundle.params
        if bundle.depths is not None:
            oracle_depths = bundle.depths.astype(np.float64)
    try:
        config = EnhanceConfig(
            stages=conf["stages"], t_min=conf["t_min"], far_percentile=conf["far_percentile"],
            beta_fit=conf["beta_fit"],
            disparity=DisparityConfig(d_min=conf["d_min"], d_max=conf["d_max"], step=conf["step"]),
            params_override=override,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    gt = _center_gt(bundle)
    lf, disp, reports, history = progressive_enhance(
        bundle.lf_degraded, bundle.rig, config, clean=bundle.lf_clean,
        gt_disparity=None if gt is None else gt.values, keep_stages=True, depths=oracle_depths)

    extras = {}
    for report, (_, stage_disp) in zip(reports, history):
        extras[f"disparity/stage_{report.stage_index}.pfm"] = encode_pfm(stage_disp.values)
    extras["disparity/final.pfm"] = encode_pfm(disp.values)
    extras["stages.json"] = (json.dumps([r.to_dict() for r in reports], indent=2) + "\n").encode("utf-8")
    text = "\n".join(r.to_text() for r in reports) + "\n"
    extras["stages.txt"] = text.encode("utf-8")
    out = SceneBundle(rig=bundle.rig, lf_clean=bundle.lf_clean, lf_degraded=bundle.lf_degraded,
                      lf_enhanced=lf, depths=bundle.depths, params=bundle.params,
                      scene_meta=bundle.scene_meta,
                      config={"command": "enhance", **conf, "input_checksum": _manifest_checksum(args.input),
                              "resolved": config.to_dict(), "upstream": bundle.config},
                      extras=extras)
    save_scene(out, args.out)
    sys.stdout.write(text)
    if any(r.beta_fallback for r in reports):
        stages = [r.stage_index for r in reports if r.beta_fallback]
        print(f"error: too few usable pixels for the attenuation fit at stage(s) {stages}; "
              "beta fell back to 0", file=sys.stderr)
        return EXIT_FALLBACK
    return EXIT_OK


# -- eval -------------------------------------------------------------------------

def _pick(bundle: SceneBundle, role, where):
    if role is None:
        return bundle.primary()
    lf = bundle.lightfield(role)
    if lf is None:
        raise MissingView(f"{where} holds no {role} views")
    return lf


def cmd_eval(args) -> int:
    conf = resolve("eval", args)
    result = load_scene(args.result)
    reference = load_scene(args.reference)
    lf = _pick(result, conf["role"], args.result)
    ref = reference.lf_clean if reference.lf_clean is not None else reference.primary()
    if lf.values.shape != ref.values.shape:
        raise ConfigError(f"shape mismatch: result {lf.values.shape} vs reference {ref.values.shape}")
    disp = gt = None
    if "disparity/final.pfm" in result.extras:
        gt = _center_gt(reference)
        if gt is not None:
            disp = DisparityMap(decode_pfm(result.extras["disparity/final.pfm"]).astype(np.float64))
    report = evaluate(lf, ref, disp, gt)
    row = report.to_row()
    sys.stdout.write(report.to_text() + "\n")
    sys.stdout.write(row)
    if conf["csv"]:
        try:
            Path(conf["csv"]).write_text(row, encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write {conf['csv']}: {exc}") from exc
    return EXIT_OK


# -- refocus ----------------------------------------------------------------------

def cmd_refocus(args) -> int:
    conf = resolve("refocus", args)
    if conf["slope"] is None and conf["depth"] is None:
        raise ConfigError("refocus needs --slope or --depth")
    bundle = load_scene(args.input)
    lf = _pick(bundle, conf["role"], args.input)
    if conf["depth"] is not None:
        if conf["slope"] is not None:
            _warn("both --slope and --depth given; using --depth")
        if not conf["depth"] > 0:
            raise ConfigError("--depth must be positive")
        slope = bundle.rig.disparity_scale / conf["depth"] - bundle.rig.zero_parallax
    else:
        slope = float(conf["slope"])
    image = refocus(lf, slope)
    try:
        write_png16(args.out, image)
    except OSError as exc:
        raise IoFailure(f"cannot write {args.out}: {exc}") from exc
    print(f"refocused at slope {slope:.6f} px/view -> {args.out}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------

def _triple(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return parts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uwlf", description="Underwater light-field toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON file of option defaults")
        return sp

    g = add("generate", "render a clean procedural light field")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--size", type=int)
    g.add_argument("--angular", type=int)
    g.add_argument("--difficulty", choices=("standard", "hard"))
    g.add_argument("--spec", help="scene spec JSON instead of a random scene")
    g.add_argument("--focal-length", dest="focal_length", type=float)
    g.add_argument("--sensor-size", dest="sensor_size", type=float)
    g.add_argument("--baseline", type=float)
    g.add_argument("--zero-parallax", dest="zero_parallax", type=float)
    g.add_argument("--max-disparity", dest="max_disparity", type=float)
    g.add_argument("--depth-format", dest="depth_format", choices=("pfm", "png16"))
    g.set_defaults(func=cmd_generate)

    d = add("degrade", "apply underwater degradation to a clean scene")
    d.add_argument("input")
    d.add_argument("--out", required=True)
    d.add_argument("--preset")
    d.add_argument("--sigma", type=float)
    d.add_argument("--seed", type=int)
    d.add_argument("--beta", type=_triple, help="explicit r,g,b attenuation")
    d.add_argument("--light", type=_triple, help="explicit r,g,b background light")
    d.add_argument("--recenter", type=float, help="extra zero-parallax shift in px/view")
    d.set_defaults(func=cmd_degrade)

    e = add("enhance", "progressive disparity estimation and enhancement")
    e.add_argument("input")
    e.add_argument("--out", required=True)
    e.add_argument("--stages", type=int)
    e.add_argument("--t-min", dest="t_min", type=float)
    e.add_argument("--far-percentile", dest="far_percentile", type=float)
    e.add_argument("--beta-fit", dest="beta_fit", choices=("least-squares", "robust-trimmed"))
    e.add_argument("--d-min", dest="d_min", type=float)
    e.add_argument("--d-max", dest="d_max", type=float)
    e.add_argument("--step", type=float)
    e.add_argument("--oracle", action="store_const", const=True,
                   help="use the recorded degradation parameters instead of estimating them")
    e.set_defaults(func=cmd_enhance)

    v = add("eval", "quality metrics of a result against a reference")
    v.add_argument("result")
    v.add_argument("reference")
    v.add_argument("--role", choices=("clean", "degraded", "enhanced"))
    v.add_argument("--csv", help="also write the metric row here")
    v.set_defaults(func=cmd_eval)

    r = add("refocus", "shift-and-add refocusing")
    r.add_argument("input")
    r.add_argument("--out", required=True)
    r.add_argument("--slope", type=float)
    r.add_argument("--depth", type=float)
    r.add_argument("--role", choices=("clean", "degraded", "enhanced"))
    r.set_defaults(func=cmd_refocus)
    return p


CONFIG_ERRORS = (ConfigError, ValueError, KeyError, TypeError)
IO_ERRORS = (IoFailure, MissingView, ChecksumMismatch, MalformedManifest, IncompleteBundle, OSError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UwlfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
