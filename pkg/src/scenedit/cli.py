"""Command-line front door: dataset generation, validation, metrics and the
HTTP session service.

Every subcommand except `serve` is deterministic for fixed flags and seed;
sequence i uses seed base_seed + i so datasets parallelize by partitioning
the seed space.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset as dataset_mod
from . import sim3d
from .assets import AssetStore, write_demo_assets
from .errors import SceneEditError
from .sampler import SamplerConfig, build_sequence, sample_initial_state
from .scene import DOMAIN_REAL, DOMAIN_SYN


def _parse_canvas(text: str) -> tuple[int, int]:
    if "x" in text:
        w, h = text.lower().split("x", 1)
        return (int(w), int(h))
    side = int(text)
    return (side, side)


def _load_config(args, domain: str) -> SamplerConfig:
    if args.config:
        cfg = SamplerConfig.from_file(args.config)
        return cfg
    objects = ((args.min_objects, args.max_objects)
               if args.min_objects is not None else None)
    kwargs = dict(seq_len=args.seq_len, seed=args.seed,
                  canvas=_parse_canvas(args.canvas),
                  r_max=min(12, args.seq_len) if args.seq_len else 1)
    if objects:
        key = "objects_real" if domain == DOMAIN_REAL else "objects_syn"
        kwargs[key] = objects
    return SamplerConfig(**kwargs)


def _generate(domain: str, args) -> int:
    store = AssetStore.load(args.assets)
    base_cfg = _load_config(args, domain)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from dataclasses import replace as dc_replace

    for i in range(args.num_seqs):
        cfg = dc_replace(base_cfg, seed=base_cfg.seed + i)
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        initial = sample_initial_state(domain, cfg, rng, store)
        seq = build_sequence(initial, cfg, rng, store,
                             seq_id=f"{domain}-{cfg.seed:010d}")
        dataset_mod.export_sequence(seq, out)
        if domain == DOMAIN_SYN:
            script = sim3d.emit_scene_script(seq.states,
                                             [r.command for r in seq.records], store)
            (out / seq.seq_id / "script.json").write_text(
                json.dumps(script, sort_keys=True, indent=1))
    print(f"generated {args.num_seqs} {domain} sequences of length "
          f"{base_cfg.seq_len} -> {out} (config {base_cfg.config_hash()})")
    return 0


def cmd_gen_real(args) -> int:
    return _generate(DOMAIN_REAL, args)


def cmd_plan_syn(args) -> int:
    return _generate(DOMAIN_SYN, args)


def cmd_validate(args) -> int:
    store = AssetStore.load(args.assets)
    report = dataset_mod.validate_dataset(args.dataset, store)
    for entry in report.entries:
        print(str(entry))
    print(f"validate: {len(report.entries)} violation(s) in {args.dataset}")
    return 0 if report.ok else 1


def cmd_metrics(args) -> int:
    from PIL import Image

    if args.frames:
        frame_dir = Path(args.frames)
        files = sorted(frame_dir.glob("*.png"))
        if len(files) < 2:
            print(f"error: need at least two frames in {frame_dir}", file=sys.stderr)
            return 2
        frames = [np.asarray(Image.open(f).convert("RGBA")) for f in files]
        p, s = dataset_mod.adjacent_pair_metrics(frames)
        print(f"PSNR: {p:.4f} dB  (adjacent-pair average over {len(files) - 1} pairs)")
        print(f"SSIM: {s:.6f}")
        return 0
    a = np.asarray(Image.open(args.image_a).convert("RGBA"))
    b = np.asarray(Image.open(args.image_b).convert("RGBA"))
    p = dataset_mod.psnr(a, b)
    s = dataset_mod.ssim(a, b)
    print(f"PSNR: {'inf' if p == float('inf') else f'{p:.4f}'} dB")
    print(f"SSIM: {s:.6f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        asset_dir=Path(args.assets),
        canvas=_parse_canvas(args.canvas),
        max_history=args.history,
        generator=args.generator,
        seed=args.seed,
        ttl_seconds=args.ttl,
        export_dir=Path(args.export_dir) if args.export_dir else None,
        ui_dir=Path(args.ui) if args.ui else None,
    )
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_demo_assets(args) -> int:
    write_demo_assets(args.out, layer_px=args.layer_px)
    print(f"wrote demo asset pack -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenedit",
        description="Deterministic 3D-aware scene editing engine and dataset tools")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_gen_flags(p):
        p.add_argument("--assets", required=True, help="asset store directory")
        p.add_argument("--out", required=True, help="output dataset directory")
        p.add_argument("--num-seqs", type=int, default=1)
        p.add_argument("--seq-len", type=int, default=32)
        p.add_argument("--canvas", default="512", help="side or WxH, e.g. 512 or 640x480")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--min-objects", type=int, default=None)
        p.add_argument("--max-objects", type=int, default=None)
        p.add_argument("--config", default=None,
                       help="sampler config file (.json or .toml); overrides other flags")

    p = sub.add_parser("gen-real", help="generate realistic-domain editing sequences")
    add_gen_flags(p)
    p.set_defaults(func=cmd_gen_real)

    p = sub.add_parser("plan-syn",
                       help="plan synthetic sequences: scene scripts + proxy renders")
    add_gen_flags(p)
    p.set_defaults(func=cmd_plan_syn)

    p = sub.add_parser("validate", help="replay-validate an exported dataset")
    p.add_argument("dataset", help="dataset root directory")
    p.add_argument("--assets", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("metrics", help="PSNR/SSIM between two images or a frame series")
    p.add_argument("image_a", nargs="?", default=None)
    p.add_argument("image_b", nargs="?", default=None)
    p.add_argument("--frames", default=None,
                   help="frame directory; reports adjacent-pair averages")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--assets", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--canvas", default="512")
    p.add_argument("--history", type=int, default=8, help="max history pairs N")
    p.add_argument("--generator", choices=("oracle", "network-stub"), default="oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ttl", type=float, default=1800.0, help="session idle TTL seconds")
    p.add_argument("--export-dir", default=None)
    p.add_argument("--ui", default=None, help="static directory with the web UI build")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("demo-assets", help="write a procedural demo asset pack")
    p.add_argument("--out", required=True)
    p.add_argument("--layer-px", type=int, default=256)
    p.set_defaults(func=cmd_demo_assets)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "metrics" and not args.frames:
        if not (args.image_a and args.image_b):
            parser.error("metrics needs two images or --frames DIR")
    try:
        return args.func(args)
    except SceneEditError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
