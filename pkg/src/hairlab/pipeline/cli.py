"""Command-line entry points.

Exit codes: 0 success, 2 validation problems (bad flags, missing or
malformed inputs), 1 runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from ..conditioning import (
    AdapterSample,
    AdapterTrainConfig,
    FinetuneConfig,
    InversionAdapter,
    embed_prompt,
    finetune_dual_encoder,
    intake_stroke_map,
    retrieval_top1,
    train_inversion_adapter,
)
from ..diffusion import NoiseSchedule, ToyCodec, TrainConfig, train_toy_backend
from ..imaging import (
    GeneratorSpec,
    avatar_caption,
    generate_avatar,
    read_image_png,
    read_keypoints_json,
    read_mask_png,
    read_rgba_png,
    read_segmap,
    write_image_png,
    write_keypoints_json,
    write_mask_png,
    write_segmap,
)
from ..imaging.types import apply_mask
from ..maskops import build_style_agnostic_mask, select_region
from ..metrics import DownsampleEmbedder, evaluate_edit
from ..warp import AugmentationSpec, WarpTrainConfig, make_warp_dataset, train_warping
from .config import load_config, load_models, save_adapter
from .request import EditRequest, SamplingSettings
from .stages import StageError, edit, make_color_stage_inputs, make_style_proxy


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hairlab", description="Hair editing pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("edit", help="run a full edit")
    _source_args(e)
    e.add_argument("--style-text")
    e.add_argument("--color-text")
    e.add_argument("--style-ref", help="style reference PNG")
    e.add_argument("--color-ref", help="color reference PNG")
    e.add_argument("--color-ref-seg", help="segmap PNG for the color reference")
    e.add_argument("--color-stroke", help="RGBA stroke PNG")
    e.add_argument("--reconstruction", action="store_true")
    e.add_argument("--out", required=True)
    e.add_argument("--artifacts", help="directory for proxies and masks")
    e.add_argument("--report", help="directory for metrics CSV/JSON and figures")
    _sampling_args(e)
    e.set_defaults(func=_cmd_edit)

    ps = sub.add_parser("proxy-style", help="render only the style proxy")
    _source_args(ps)
    ps.add_argument("--style-text")
    ps.add_argument("--style-ref")
    ps.add_argument("--out", required=True)
    ps.add_argument("--mask-out", help="write the proxy hair mask PNG here")
    _sampling_args(ps)
    ps.set_defaults(func=_cmd_proxy_style)

    pc = sub.add_parser("proxy-color", help="render only the color proxy")
    _source_args(pc)
    pc.add_argument("--color-stroke")
    pc.add_argument("--color-ref")
    pc.add_argument("--color-ref-seg")
    pc.add_argument("--out", required=True)
    _sampling_args(pc)
    pc.set_defaults(func=_cmd_proxy_color)

    tw = sub.add_parser("train-warp", help="train the warping module on avatars")
    tw.add_argument("--avatars", type=int, default=10)
    tw.add_argument("--n-augment", type=int, default=1)
    tw.add_argument("--rotation", type=float, default=10.0)
    tw.add_argument("--trig-amplitude", type=float, default=1.5)
    tw.add_argument("--scale-min", type=float, default=0.9)
    tw.add_argument("--scale-max", type=float, default=1.1)
    tw.add_argument("--iterations", type=int, default=2000)
    tw.add_argument("--batch", type=int, default=8)
    tw.add_argument("--gen-lr", type=float, default=2e-4)
    tw.add_argument("--disc-lr", type=float, default=2e-4)
    tw.add_argument("--adv-weight", type=float, default=0.1)
    tw.add_argument("--alpha-weight", type=float, default=0.0)
    tw.add_argument("--base", type=int, default=32)
    tw.add_argument("--scales", type=int, default=4)
    tw.add_argument("--seed", type=int, default=0)
    tw.add_argument("--out", required=True)
    tw.add_argument("--loss-csv")
    tw.add_argument("--report")
    tw.set_defaults(func=_cmd_train_warp)

    tb = sub.add_parser("train-toy-backend", help="train the toy denoiser on avatars")
    tb.add_argument("--avatars", type=int, default=64)
    tb.add_argument("--steps", type=int, default=3000)
    tb.add_argument("--batch", type=int, default=4)
    tb.add_argument("--lr", type=float, default=2e-4)
    tb.add_argument("--base", type=int, default=32)
    tb.add_argument("--schedule-steps", type=int, default=50)
    tb.add_argument("--seed", type=int, default=0)
    tb.add_argument("--encoder-seed", type=int, default=0)
    tb.add_argument("--out", required=True)
    tb.add_argument("--loss-csv")
    tb.add_argument("--report")
    tb.set_defaults(func=_cmd_train_backend)

    ta = sub.add_parser("train-adapter", help="train the reference-inversion adapter")
    ta.add_argument("--avatars", type=int, default=16)
    ta.add_argument("--steps", type=int, default=500)
    ta.add_argument("--batch", type=int, default=4)
    ta.add_argument("--lr", type=float, default=1e-3)
    ta.add_argument("--schedule-steps", type=int, default=50)
    ta.add_argument("--seed", type=int, default=0)
    ta.add_argument("--backend", help="trained denoiser checkpoint")
    ta.add_argument("--config")
    ta.add_argument("--out", required=True)
    ta.set_defaults(func=_cmd_train_adapter)

    fe = sub.add_parser("finetune-encoder", help="contrastive text-head finetune")
    fe.add_argument("--avatars", type=int, default=16)
    fe.add_argument("--steps", type=int, default=200)
    fe.add_argument("--lr", type=float, default=1e-2)
    fe.add_argument("--mirror", action="store_true")
    fe.add_argument("--rotations", type=float, nargs="*", default=[0.0])
    fe.add_argument("--seed", type=int, default=0)
    fe.add_argument("--out", required=True)
    fe.set_defaults(func=_cmd_finetune_encoder)

    ga = sub.add_parser("gen-avatars", help="write procedural avatar samples")
    ga.add_argument("--count", type=int, required=True)
    ga.add_argument("--seed", type=int, default=0)
    ga.add_argument("--out", required=True)
    ga.set_defaults(func=_cmd_gen_avatars)

    ev = sub.add_parser("eval", help="score an edit on the non-hair region")
    ev.add_argument("--before", required=True)
    ev.add_argument("--after", required=True)
    ev.add_argument("--seg-before", required=True)
    ev.add_argument("--seg-after", required=True)
    ev.add_argument("--csv", help="append a row to this CSV")
    ev.add_argument("--report", help="directory for figures")
    ev.add_argument(
        "--feature-metrics",
        action="store_true",
        help="also report FID/perceptual distance status",
    )
    ev.set_defaults(func=_cmd_eval)

    sv = sub.add_parser("serve", help="run the HTTP service")
    sv.add_argument("--config")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8787)
    sv.set_defaults(func=_cmd_serve)

    return p


def _source_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--source", required=True, help="source portrait PNG")
    p.add_argument("--seg", required=True, help="indexed segmap PNG (+ labels sidecar)")
    p.add_argument("--kp", required=True, help="keypoints JSON")
    p.add_argument("--pose", help="dense pose-prior PNG (improves reference warping)")
    p.add_argument("--config", help="pipeline TOML")


def _sampling_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int)
    p.add_argument("--guidance", type=float)
    p.add_argument("--tau-fraction", type=float)
    p.add_argument("--blend-window", type=int)


def _load_request(args) -> tuple[EditRequest, object]:
    cfg = load_config(args.config)
    models = load_models(cfg)
    source = read_image_png(args.source)
    seg = read_segmap(args.seg)
    kp = read_keypoints_json(args.kp)
    pose = read_image_png(args.pose) if getattr(args, "pose", None) else None
    sampling = SamplingSettings(
        steps=args.steps if args.steps is not None else cfg.steps,
        guidance=args.guidance if args.guidance is not None else cfg.guidance,
        tau_fraction=(
            args.tau_fraction if args.tau_fraction is not None else cfg.tau_fraction
        ),
        blend_window=(
            args.blend_window if args.blend_window is not None else cfg.blend_window
        ),
        seed=args.seed,
    )
    stroke = None
    if getattr(args, "color_stroke", None):
        raw = read_rgba_png(args.color_stroke)
        stroke = intake_stroke_map(raw, (source.height, source.width))
    style_ref = (
        read_image_png(args.style_ref) if getattr(args, "style_ref", None) else None
    )
    color_ref = None
    color_ref_hair = None
    if getattr(args, "color_ref", None):
        color_ref = read_image_png(args.color_ref)
        if not getattr(args, "color_ref_seg", None):
            raise ValueError("--color-ref requires --color-ref-seg")
        ref_seg = read_segmap(args.color_ref_seg)
        color_ref_hair = select_region(ref_seg, ("hair",))
    req = EditRequest(
        source=source,
        segmap=seg,
        keypoints=kp,
        pose_prior=pose,
        style_text=getattr(args, "style_text", None),
        color_text=getattr(args, "color_text", None),
        style_ref=style_ref,
        color_ref=color_ref,
        color_ref_hair=color_ref_hair,
        stroke=stroke,
        reconstruction=getattr(args, "reconstruction", False),
        sampling=sampling,
    )
    return req, models


def _cmd_edit(args) -> int:
    req, models = _load_request(args)
    result = edit(req, models)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_image_png(result.output, out)
    out.with_suffix(".provenance.json").write_text(
        json.dumps(result.provenance, indent=2, sort_keys=True)
    )
    if args.artifacts:
        art = Path(args.artifacts)
        art.mkdir(parents=True, exist_ok=True)
        if result.style_proxy is not None:
            write_image_png(result.style_proxy.image, art / "style_proxy.png")
            write_mask_png(result.style_proxy.hair_mask, art / "style_proxy_hair.png")
        if result.color_proxy is not None:
            write_image_png(result.color_proxy.image, art / "color_proxy.png")
        write_mask_png(result.agnostic_mask, art / "agnostic_mask.png")
        write_mask_png(result.color_mask, art / "color_mask.png")
        write_mask_png(result.restore_mask, art / "restore_mask.png")
    if args.report:
        from .report import render_edit_report

        render_edit_report(req, result, args.report)
    return 0


def _cmd_proxy_style(args) -> int:
    args.reconstruction = False
    req, models = _load_request(args)
    proxy = make_style_proxy(req, models)
    write_image_png(proxy.image, args.out)
    if args.mask_out:
        write_mask_png(proxy.hair_mask, args.mask_out)
    return 0


def _cmd_proxy_color(args) -> int:
    args.reconstruction = True  # permit stroke-less preview requests
    req, models = _load_request(args)
    inputs = make_color_stage_inputs(req, None, models)
    if inputs.proxy is None:
        raise ValueError("no color source given (need a stroke or color reference)")
    write_image_png(inputs.proxy.image, args.out)
    return 0


def _cmd_train_warp(args) -> int:
    samples = [generate_avatar(seed=args.seed + i) for i in range(args.avatars)]
    aug = AugmentationSpec(
        rotation=args.rotation,
        trig_amplitude=args.trig_amplitude,
        scale=(args.scale_min, args.scale_max),
        seed=args.seed,
    )
    dataset = make_warp_dataset(samples, aug, n_augment=args.n_augment)
    cfg = WarpTrainConfig(
        iterations=args.iterations,
        batch=args.batch,
        gen_lr=args.gen_lr,
        disc_lr=args.disc_lr,
        adv_weight=args.adv_weight,
        alpha_weight=args.alpha_weight,
        seed=args.seed,
        base=args.base,
        scales=args.scales,
        out_path=args.out,
        loss_csv=args.loss_csv,
    )
    train_warping(dataset, cfg)
    if args.report and args.loss_csv:
        from .report import render_loss_report

        render_loss_report(args.loss_csv, args.report)
    return 0


def _dataset_with_captions(count: int, seed: int, encoder):
    samples = [generate_avatar(seed=seed + i) for i in range(count)]
    images = [s.image for s in samples]
    captions = [avatar_caption(s.params) for s in samples]
    pooled = np.stack([embed_prompt(encoder, c).pooled() for c in captions])
    uncond = embed_prompt(encoder, "").pooled()
    return samples, images, captions, pooled, uncond


def _cmd_train_backend(args) -> int:
    from ..conditioning import ToyDualEncoder

    encoder = ToyDualEncoder(seed=args.encoder_seed)
    _, images, _, pooled, uncond = _dataset_with_captions(
        args.avatars, args.seed, encoder
    )
    sched = NoiseSchedule.linear_beta(args.schedule_steps)
    cfg = TrainConfig(
        steps=args.steps,
        batch=args.batch,
        lr=args.lr,
        seed=args.seed,
        base=args.base,
        out_path=args.out,
        loss_csv=args.loss_csv,
    )
    train_toy_backend(
        images, ToyCodec(), sched, cfg, embeddings=pooled, uncond_embedding=uncond
    )
    if args.report and args.loss_csv:
        from .report import render_loss_report

        render_loss_report(args.loss_csv, args.report)
    return 0


def _cmd_train_adapter(args) -> int:
    from dataclasses import replace

    cfg = load_config(args.config)
    if args.backend:
        cfg = replace(cfg, backend_path=args.backend)
    models = load_models(cfg)
    samples = [generate_avatar(seed=args.seed + i) for i in range(args.avatars)]
    codec = models.codec
    dataset = []
    for s in samples:
        keep = build_style_agnostic_mask(s.segmap, s.keypoints)
        dataset.append(
            AdapterSample(
                masked_face=apply_mask(s.image, keep),
                keep_mask=keep,
                latent=codec.encode(s.image),
            )
        )
    adapter = InversionAdapter(seed=args.seed)
    train_inversion_adapter(
        adapter,
        models.encoder,
        models.backend,
        dataset,
        NoiseSchedule.linear_beta(args.schedule_steps),
        codec,
        AdapterTrainConfig(
            steps=args.steps, batch=args.batch, lr=args.lr, seed=args.seed
        ),
    )
    save_adapter(adapter, args.out)
    return 0


def _cmd_finetune_encoder(args) -> int:
    from ..conditioning import ToyDualEncoder
    from ..tensorio import save_tensors

    encoder = ToyDualEncoder(seed=args.seed)
    samples = [generate_avatar(seed=args.seed + i) for i in range(args.avatars)]
    pairs = [(avatar_caption(s.params), s.image) for s in samples]
    finetune_dual_encoder(
        encoder,
        pairs,
        rotations=tuple(args.rotations),
        mirror=args.mirror,
        config=FinetuneConfig(steps=args.steps, lr=args.lr, seed=args.seed),
    )
    acc = retrieval_top1(encoder, pairs)
    tensors = {k: v.detach().cpu().numpy() for k, v in encoder.state_dict().items()}
    save_tensors(args.out, tensors, {"retrieval_top1": acc, "seed": args.seed})
    print(f"retrieval top-1 after finetune: {acc:.3f}")
    return 0


def _cmd_gen_avatars(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(args.count):
        s = generate_avatar(seed=args.seed + i)
        stem = f"avatar_{i:04d}"
        write_image_png(s.image, out / f"{stem}.png")
        write_segmap(s.segmap, out / f"{stem}.seg.png")
        write_keypoints_json(s.keypoints, out / f"{stem}.kp.json")
        write_image_png(s.pose_prior, out / f"{stem}.pose.png")
        rows.append((stem, avatar_caption(s.params)))
    with open(out / "captions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stem", "caption"])
        writer.writerows(rows)
    return 0


def _cmd_eval(args) -> int:
    before = read_image_png(args.before)
    after = read_image_png(args.after)
    seg_before = read_segmap(args.seg_before)
    seg_after = read_segmap(args.seg_after)
    report = evaluate_edit(
        before, after, seg_before, seg_after, embedder=DownsampleEmbedder()
    )
    payload = report.as_dict()
    if args.feature_metrics:
        from ..metrics import UNAVAILABLE_MESSAGE

        payload["fid"] = UNAVAILABLE_MESSAGE
        payload["perceptual_distance"] = UNAVAILABLE_MESSAGE
    print(json.dumps(payload, indent=2))
    if args.csv:
        from .report import render_eval_report

        render_eval_report(report, args.csv, args.report)
    elif args.report:
        from .report import render_eval_report

        render_eval_report(report, Path(args.report) / "eval.csv", args.report)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import make_app

    cfg = load_config(args.config)
    app = make_app(cfg)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
