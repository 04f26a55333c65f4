"""Manifest-driven pipeline commands.

Subcommands: score, partition, warp-fit, compose, eval, demo. Manifests are
JSON-lines with per-entry file paths resolved relative to the manifest;
reports are JSON with sorted keys so identical runs produce identical bytes.
Entry failures are recorded and the run continues; the exit code is 0 only
if every entry succeeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .demo import build_demo_scene
from .fuse import assemble_tryon
from .imaging import (
    LABEL_TORSO_CLOTHES,
    AlphaMap,
    BinaryMask,
    LabelMap,
    Raster,
    label_mask,
)
from .layout import (
    LayoutBundle,
    alpha_composite,
    compose_layout,
    oracle_bundle,
    preserved_image,
    strip_clothes,
)
from .metrics import mean_l1, ssim
from .score import PoseKeypoints, complexity, partition, reference_points
from .tps import ControlGrid, WarpParams, warp_image
from .warpfit import ConstraintConfig, FitConfig, fit_warp

DIFFICULTIES = ("easy", "medium", "hard")

_ENTRY_REQUIRED = ("id", "reference", "parse", "pose", "clothes", "clothes_mask")
_ENTRY_OPTIONAL = ("synth_body", "synth_clothes", "refined", "alpha")


@dataclass(frozen=True)
class ManifestEntry:
    """One work item; path fields are absolute after loading."""

    id: str
    reference: Path
    parse: Path
    pose: Path
    clothes: Path
    clothes_mask: Path
    synth_body: Path | None = None
    synth_clothes: Path | None = None
    refined: Path | None = None
    alpha: Path | None = None


@dataclass(frozen=True)
class RunConfig:
    """Validated run settings; flags override config-file values."""

    resolution: tuple | None = None
    grid_k: int = 5
    constraint: ConstraintConfig = ConstraintConfig()
    fit: FitConfig = FitConfig()
    oracle_layout: bool = False
    out_dir: Path = Path("out")
    parallel: int = 1
    l4_threshold: float | None = None

    def __post_init__(self):
        ControlGrid(self.grid_k)  # validates k
        if self.parallel < 1:
            raise ValueError(f"parallel must be >= 1, got {self.parallel}")
        if self.resolution is not None:
            h, w = self.resolution
            if h < 1 or w < 1:
                raise ValueError(f"resolution must be positive, got {self.resolution}")
            object.__setattr__(self, "resolution", (int(h), int(w)))
        if self.l4_threshold is not None and not self.l4_threshold > 0:
            raise ValueError(f"l4_threshold must be > 0, got {self.l4_threshold}")


def load_manifest(path) -> list[ManifestEntry]:
    """Parse a JSON-lines manifest; paths become absolute, ids must be unique."""
    path = Path(path)
    base = path.parent
    entries = []
    seen = set()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        missing = [key for key in _ENTRY_REQUIRED if key not in doc]
        if missing:
            raise ValueError(f"{path}:{lineno}: missing fields {missing}")
        unknown = set(doc) - set(_ENTRY_REQUIRED) - set(_ENTRY_OPTIONAL)
        if unknown:
            raise ValueError(f"{path}:{lineno}: unknown fields {sorted(unknown)}")
        entry_id = str(doc["id"])
        if entry_id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate id {entry_id!r}")
        seen.add(entry_id)

        def resolve(key):
            return (base / doc[key]).resolve() if key in doc else None

        entries.append(
            ManifestEntry(
                id=entry_id,
                reference=resolve("reference"),
                parse=resolve("parse"),
                pose=resolve("pose"),
                clothes=resolve("clothes"),
                clothes_mask=resolve("clothes_mask"),
                synth_body=resolve("synth_body"),
                synth_clothes=resolve("synth_clothes"),
                refined=resolve("refined"),
                alpha=resolve("alpha"),
            )
        )
    return entries


def load_config(path) -> RunConfig:
    """Read a JSON config file into a RunConfig; unknown keys are errors."""
    doc = json.loads(Path(path).read_text())
    known = {
        "resolution",
        "grid_k",
        "constraint",
        "fit",
        "oracle_layout",
        "out_dir",
        "parallel",
        "l4_threshold",
    }
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"config {path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    if "resolution" in doc:
        kwargs["resolution"] = tuple(doc["resolution"])
    if "grid_k" in doc:
        kwargs["grid_k"] = int(doc["grid_k"])
    if "constraint" in doc:
        kwargs["constraint"] = ConstraintConfig(**doc["constraint"])
    if "fit" in doc:
        fit = dict(doc["fit"])
        if "betas" in fit:
            fit["betas"] = tuple(fit["betas"])
        kwargs["fit"] = FitConfig(**fit)
    if "oracle_layout" in doc:
        kwargs["oracle_layout"] = bool(doc["oracle_layout"])
    if "out_dir" in doc:
        kwargs["out_dir"] = Path(doc["out_dir"])
    if "parallel" in doc:
        kwargs["parallel"] = int(doc["parallel"])
    if "l4_threshold" in doc and doc["l4_threshold"] is not None:
        kwargs["l4_threshold"] = float(doc["l4_threshold"])
    return RunConfig(**kwargs)


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.out is not None:
        cfg = replace(cfg, out_dir=Path(args.out))
    if getattr(args, "oracle_layout", False):
        cfg = replace(cfg, oracle_layout=True)
    if args.grid_k is not None:
        cfg = replace(cfg, grid_k=args.grid_k)
    ccfg = cfg.constraint
    if args.lambda_r is not None:
        ccfg = replace(ccfg, lambda_r=args.lambda_r)
    if args.lambda_s is not None:
        ccfg = replace(ccfg, lambda_s=args.lambda_s)
    if args.delta is not None:
        ccfg = replace(ccfg, delta=args.delta)
    if ccfg is not cfg.constraint:
        cfg = replace(cfg, constraint=ccfg)
    if args.iters is not None:
        cfg = replace(cfg, fit=replace(cfg.fit, iterations=args.iters))
    if args.parallel is not None:
        cfg = replace(cfg, parallel=args.parallel)
    return cfg


def _load_pose(path) -> PoseKeypoints:
    return PoseKeypoints.from_json(Path(path).read_text())


def _load_alpha(path) -> AlphaMap:
    with Image.open(path) as im:
        raw = np.asarray(im.convert("L"))
    return AlphaMap(raw.astype(np.float64) / 255.0)


def _mask_raster(mask: BinaryMask) -> Raster:
    """Binary mask as a black-and-white image, the warp-fit operand."""
    gray = mask.bits * np.uint8(255)
    return Raster(np.repeat(gray[:, :, None], 3, axis=2))


def _check_resolution(cfg: RunConfig, img, what: str) -> None:
    if cfg.resolution is None:
        return
    if (img.height, img.width) != cfg.resolution:
        raise ValueError(
            f"{what} is {img.height}x{img.width}, "
            f"config requires {cfg.resolution[0]}x{cfg.resolution[1]}"
        )


def _run_entries(entries, worker, parallel: int):
    """Run worker per entry, isolating failures. Returns (results, errors)."""

    def call(entry):
        try:
            return entry.id, worker(entry), None
        except Exception as exc:
            return entry.id, None, f"{type(exc).__name__}: {exc}"

    if parallel <= 1:
        outcomes = [call(entry) for entry in entries]
    else:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(call, entries))

    results = [result for _, result, err in outcomes if err is None]
    errors = [
        {"id": entry_id, "error": err} for entry_id, _, err in outcomes if err is not None
    ]
    return results, sorted(errors, key=lambda e: e["id"])


def _write_report(out_dir: Path, name: str, doc: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def _difficulty_counts(rows) -> dict:
    counts = {name: 0 for name in DIFFICULTIES}
    for row in rows:
        counts[row["difficulty"]] += 1
    return counts


def _print_errors(errors) -> None:
    for err in errors:
        print(f"error {err['id']}: {err['error']}", file=sys.stderr)


def cmd_score(manifest_path, cfg: RunConfig, counts_only: bool = False) -> int:
    """Score each entry's pose complexity and bucket by difficulty."""
    entries = load_manifest(manifest_path)

    def worker(entry: ManifestEntry) -> dict:
        pose = _load_pose(entry.pose)
        value = complexity(reference_points(pose))
        return {
            "id": entry.id,
            "complexity": value,
            "difficulty": partition(value),
        }

    rows, errors = _run_entries(entries, worker, cfg.parallel)
    rows.sort(key=lambda r: r["id"])
    counts = _difficulty_counts(rows)
    doc = {"counts": counts, "errors": errors}
    name = "partition.json"
    if not counts_only:
        doc["entries"] = rows
        name = "score.json"
    _write_report(cfg.out_dir, name, doc)

    for difficulty in DIFFICULTIES:
        print(f"{difficulty:<8}{counts[difficulty]:>6}")
    _print_errors(errors)
    return 1 if errors else 0


def compose_entry(entry: ManifestEntry, cfg: RunConfig) -> dict:
    """Run the whole per-entry pipeline; returns the report row."""
    reference = Raster.load(entry.reference)
    _check_resolution(cfg, reference, f"{entry.id}: reference")
    parse = LabelMap.load(entry.parse)
    clothes_img = Raster.load(entry.clothes)
    clothes_mask = BinaryMask.load(entry.clothes_mask)

    if cfg.oracle_layout:
        bundle = oracle_bundle(parse)
    else:
        if entry.synth_body is None or entry.synth_clothes is None:
            raise ValueError(
                "entry has no synthesized layout; provide synth_body and "
                "synth_clothes or run with --oracle-layout"
            )
        bundle = LayoutBundle(
            parse=parse,
            synth_body=LabelMap.load(entry.synth_body),
            synth_clothes=BinaryMask.load(entry.synth_clothes),
            clothes=label_mask(parse, {LABEL_TORSO_CLOTHES}),
        )
    comp = compose_layout(bundle)

    init = WarpParams.identity(ControlGrid(cfg.grid_k))
    report = fit_warp(
        _mask_raster(clothes_mask),
        _mask_raster(bundle.synth_clothes),
        cfg.constraint,
        cfg.fit,
        init=init,
    )
    warped = warp_image(clothes_img, report.params)

    refined = Raster.load(entry.refined) if entry.refined else warped
    if entry.alpha:
        alpha = _load_alpha(entry.alpha)
    else:
        alpha = AlphaMap(np.zeros((warped.height, warped.width)))
    composed = alpha_composite(warped, refined, alpha)

    preserved = preserved_image(
        strip_clothes(reference, bundle.clothes), bundle.synth_clothes
    )
    output = assemble_tryon(preserved, composed, comp)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    output.save(cfg.out_dir / f"{entry.id}.png")
    report_doc = {"id": entry.id, **report.to_json_dict()}
    (cfg.out_dir / f"{entry.id}_report.json").write_text(
        json.dumps(report_doc, sort_keys=True) + "\n"
    )
    return {
        "id": entry.id,
        "image": f"{entry.id}.png",
        "report": f"{entry.id}_report.json",
        "converged": report.converged,
        "final_l3": float(report.l3[-1]),
        "final_l4": float(report.l4[-1]),
        "generated_pixels": int(comp.generate.bits.sum()),
    }


def cmd_compose(manifest_path, cfg: RunConfig) -> int:
    """Compose a try-on image for every manifest entry."""
    entries = load_manifest(manifest_path)
    rows, errors = _run_entries(entries, lambda e: compose_entry(e, cfg), cfg.parallel)
    rows.sort(key=lambda r: r["id"])
    _write_report(cfg.out_dir, "compose.json", {"entries": rows, "errors": errors})
    for row in rows:
        print(
            f"{row['id']:<12} l4={row['final_l4']:.5f} "
            f"generated={row['generated_pixels']}"
        )
    _print_errors(errors)
    return 1 if errors else 0


def cmd_eval(manifest_path, cfg: RunConfig) -> int:
    """Compare composed outputs against references, grouped by difficulty."""
    entries = load_manifest(manifest_path)

    def worker(entry: ManifestEntry) -> dict:
        composed_path = cfg.out_dir / f"{entry.id}.png"
        if not composed_path.exists():
            raise FileNotFoundError(f"no composed output {composed_path}")
        composed = Raster.load(composed_path)
        reference = Raster.load(entry.reference)
        pose = _load_pose(entry.pose)
        difficulty = partition(complexity(reference_points(pose)))
        return {
            "id": entry.id,
            "difficulty": difficulty,
            "ssim": ssim(composed, reference),
            "l1": mean_l1(composed, reference),
        }

    rows, errors = _run_entries(entries, worker, cfg.parallel)
    rows.sort(key=lambda r: r["id"])

    groups = {}
    for difficulty in DIFFICULTIES:
        members = [r for r in rows if r["difficulty"] == difficulty]
        groups[difficulty] = {
            "count": len(members),
            "ssim": float(np.mean([r["ssim"] for r in members])) if members else None,
            "l1": float(np.mean([r["l1"] for r in members])) if members else None,
        }
    _write_report(cfg.out_dir, "eval.json", {"entries": rows, "groups": groups, "errors": errors})

    print(f"{'difficulty':<12}{'count':>6}  {'ssim':>8}  {'l1':>8}")
    for difficulty in DIFFICULTIES:
        g = groups[difficulty]
        ssim_text = f"{g['ssim']:.4f}" if g["ssim"] is not None else "-"
        l1_text = f"{g['l1']:.4f}" if g["l1"] is not None else "-"
        print(f"{difficulty:<12}{g['count']:>6}  {ssim_text:>8}  {l1_text:>8}")
    _print_errors(errors)
    return 1 if errors else 0


def cmd_warp_fit(source_path, target_path, cfg: RunConfig) -> int:
    """Fit a warp for one source/target pair and emit its report."""
    try:
        source = Raster.load(source_path)
        target = Raster.load(target_path)
        report = fit_warp(
            source,
            target,
            cfg.constraint,
            cfg.fit,
            init=WarpParams.identity(ControlGrid(cfg.grid_k)),
        )
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        warp_image(source, report.params).save(cfg.out_dir / "warped.png")
        _write_report(cfg.out_dir, "warp_report.json", report.to_json_dict())
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(
        f"converged={report.converged} final_total={report.total[-1]:.6f} "
        f"final_l4={report.l4[-1]:.6f}"
    )
    return 0


def cmd_demo(cfg: RunConfig) -> int:
    """Write the synthetic demo scene (images, parses, poses, manifest)."""
    manifest = build_demo_scene(cfg.out_dir)
    print(manifest)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tryongeo",
        description="Deterministic try-on geometry: warp fitting, layout "
        "composition, scoring and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_manifest=True):
        if with_manifest:
            p.add_argument("--manifest", required=True, help="JSON-lines manifest path")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--oracle-layout", action="store_true",
                       help="use each entry's own parse as the target layout")
        p.add_argument("--grid-k", type=int, help="control grid side count")
        p.add_argument("--lambda-r", type=float, help="distance-term weight")
        p.add_argument("--lambda-s", type=float, help="slope-term weight")
        p.add_argument("--delta", type=float, help="constraint hinge margin")
        p.add_argument("--iters", type=int, help="fit iterations")
        p.add_argument("--parallel", type=int, help="concurrent entries")

    add_common(sub.add_parser("score", help="pose complexity per entry"))
    add_common(sub.add_parser("partition", help="difficulty counts only"))
    add_common(sub.add_parser("compose", help="compose try-on images"))
    add_common(sub.add_parser("eval", help="SSIM/L1 against references"))

    warp = sub.add_parser("warp-fit", help="fit one source/target pair")
    warp.add_argument("source", help="source image PNG")
    warp.add_argument("target", help="target image PNG")
    add_common(warp, with_manifest=False)

    demo = sub.add_parser("demo", help="write the synthetic demo scene")
    add_common(demo, with_manifest=False)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "score":
            return cmd_score(args.manifest, cfg)
        if args.command == "partition":
            return cmd_score(args.manifest, cfg, counts_only=True)
        if args.command == "compose":
            return cmd_compose(args.manifest, cfg)
        if args.command == "eval":
            return cmd_eval(args.manifest, cfg)
        if args.command == "warp-fit":
            return cmd_warp_fit(args.source, args.target, cfg)
        if args.command == "demo":
            return cmd_demo(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
