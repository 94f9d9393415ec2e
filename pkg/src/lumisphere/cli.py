"""Command-line harness: synth, reconstruct, eval, transfer, reshade, serve, plot.

Options resolve in three layers: built-in defaults (printed in --help),
then a flat TOML config file, then explicit flags. Exit codes: 0 on
success, 1 when evaluation or reconstruction hit item-level failures,
2 for configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__, pfm
from .color import clamp_gamut
from .dataset import (
    SynthConfig,
    generate_dataset,
    item_image,
    item_normals,
    item_rm,
    load_manifest,
)
from .edit import EditSession, material_transfer, shape_reshade
from .metrics import RESULTS_SCHEMA, emit_results_table, rm_score
from .methods import load_prediction, parse_method, run_reconstruct

ASSETS_ENV = "LUMISPHERE_ASSETS"


class CliError(Exception):
    """Configuration or I/O problem; maps to exit code 2."""


def _load_config(path):
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise CliError(f"config file not found: {path}")
    with open(path, "rb") as f:
        return tomllib.load(f)


def _layered(args, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    config = _load_config(args.config)
    assets = _layered(args, config, "assets", os.environ.get(ASSETS_ENV))
    synth = SynthConfig(
        samples=int(_layered(args, config, "samples", 500)),
        seed=int(_layered(args, config, "seed", 0)),
        rm_resolution=int(_layered(args, config, "rm_resolution", 32)),
        image_size=int(_layered(args, config, "image_size", 96)),
        mc_samples=int(_layered(args, config, "mc_samples", 1024)),
        split_fraction=float(_layered(args, config, "split_fraction", 0.5)),
        shadow=bool(_layered(args, config, "shadow", True)),
        assets=assets,
        env_count=int(_layered(args, config, "env_count", 4)),
        env_seed=int(_layered(args, config, "env_seed", 100)),
    )
    manifest = generate_dataset(synth, args.out)
    print(f"wrote {len(manifest['items'])} items under {args.out}")
    return 0


def cmd_reconstruct(args) -> int:
    manifest = load_manifest(args.dataset)
    any_errors = False
    for text in args.method:
        spec = parse_method(text)
        written, errors = run_reconstruct(args.dataset, manifest, spec, emit_sparse=args.emit_sparse)
        print(f"method {spec.name}: {len(written)} predictions")
        for item_id, message in errors:
            any_errors = True
            print(f"  ERROR {item_id}: {message}", file=sys.stderr)
    return 1 if any_errors else 0


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def cmd_eval(args) -> int:
    start = time.time()
    manifest = load_manifest(args.dataset)
    splits = args.split if args.split != ["all"] else ["train", "test"]
    items = [it for it in manifest["items"] if it["split"] in splits]
    if not items:
        raise CliError(f"no items in splits {splits}")

    per_item = {}
    scores = {}
    any_errors = False
    for name in args.method:
        split_acc = {s: {"mse": [], "dssim": []} for s in splits}
        per_item[name] = {}
        for item in items:
            try:
                gt = item_rm(args.dataset, item, args.rm)
                pred = load_prediction(args.dataset, name, item)
                score = rm_score(pred, gt)
            except (OSError, ValueError) as e:
                any_errors = True
                print(f"  ERROR {name}/{item['id']}: {e}", file=sys.stderr)
                continue
            split_acc[item["split"]]["mse"].append(score.mse)
            split_acc[item["split"]]["dssim"].append(score.dssim)
            per_item[name][item["id"]] = {
                "mse": score.mse,
                "dssim": score.dssim,
                "defined_overlap": score.defined_overlap,
            }
        scores[name] = {
            s: (float(np.mean(acc["mse"])), float(np.mean(acc["dssim"])))
            for s, acc in split_acc.items()
            if acc["mse"]
        }

    table, record = emit_results_table(scores, [s for s in splits if any(s in v for v in scores.values())])
    print(table, end="")

    if args.out:
        with open(args.out, "w") as f:
            json.dump(record, f, indent=1, sort_keys=True)
            f.write("\n")
        run_record = {
            "tool_version": __version__,
            "rm_variant": args.rm,
            "config": {"dataset": os.path.abspath(args.dataset), "methods": args.method, "splits": splits},
            "asset_hashes": {"manifest": _sha256(os.path.join(args.dataset, "manifest.json"))},
            "per_item": per_item,
            "wall_clock_s": time.time() - start,
        }
        base, ext = os.path.splitext(args.out)
        with open(base + ".run" + ext, "w") as f:
            json.dump(run_record, f, indent=1, sort_keys=True)
            f.write("\n")
    return 1 if any_errors else 0


def _session_for_item(dataset, item_id: str) -> EditSession:
    manifest = load_manifest(dataset)
    for item in manifest["items"]:
        if item["id"] == item_id:
            return EditSession(
                item_image(dataset, item, "display"),
                item_normals(dataset, item),
                item_rm(dataset, item, "display"),
            )
    raise CliError(f"item {item_id} not found in {dataset}")


def _write_image(path, img) -> None:
    if os.fspath(path).endswith(".pfm"):
        pfm.write_masked(path, img.rgb, img.mask)
        return
    from .service import image_to_png_bytes

    with open(path, "wb") as f:
        f.write(image_to_png_bytes(img))


def cmd_transfer(args) -> int:
    session = _session_for_item(args.dataset, args.item)
    if args.rm_from:
        manifest = load_manifest(args.dataset)
        donor = next((it for it in manifest["items"] if it["id"] == args.rm_from), None)
        if donor is None:
            raise CliError(f"item {args.rm_from} not found")
        rm = item_rm(args.dataset, donor, "display")
    elif args.rm_file:
        from .core import ReflectanceMap

        data, mask = pfm.read_masked(args.rm_file)
        rm = ReflectanceMap(np.clip(data, 0.0, None), mask)
    else:
        raise CliError("transfer needs --rm-from or --rm-file")
    _write_image(args.out, material_transfer(session, rm))
    print(f"wrote {args.out}")
    return 0


def cmd_reshade(args) -> int:
    from .core import NormalMap

    session = _session_for_item(args.dataset, args.item)
    data, mask = pfm.read_masked(args.normals)
    lengths = np.linalg.norm(data, axis=-1, keepdims=True)
    data = np.where(mask[..., None] & (lengths > 0), data / np.where(lengths > 0, lengths, 1.0), 0.0)
    _write_image(args.out, shape_reshade(session, NormalMap(data, mask)))
    print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    sessions = {}
    gallery = {}
    if args.dataset:
        manifest = load_manifest(args.dataset)
        wanted = args.items.split(",") if args.items else [manifest["items"][0]["id"]]
        for item_id in wanted:
            sessions[item_id] = _session_for_item(args.dataset, item_id)
        for item in manifest["items"]:
            gallery[f"rm:{item['id']}"] = item_rm(args.dataset, item, "display")
    else:
        from .core import shade_from_normals
        from .dataset import builtin_registry
        from .render import (
            brdf_convolve,
            log_average_luminance,
            procedural_normals,
            reinhard_tonemap,
            tonemap_map,
        )

        reg = builtin_registry(n_envs=2)
        nm = procedural_normals(reg.shapes["pillow"], 30.0, 128)
        rm_linear = brdf_convolve(reg.envs["env-00"], reg.materials["gloss-high"], 32, 1024, seed=7)
        img = shade_from_normals(nm, rm_linear)
        log_avg = log_average_luminance(img)
        sessions["demo"] = EditSession(
            reinhard_tonemap(img, 0.5), nm, tonemap_map(rm_linear, 0.5, log_avg)
        )
        rm2 = brdf_convolve(reg.envs["env-01"], reg.materials["lambert-red"], 32, 1024, seed=8)
        gallery["rm:alt"] = tonemap_map(rm2, 0.5, log_avg)

    app = create_app(sessions, gallery, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(args.results) as f:
        record = json.load(f)
    import jsonschema

    jsonschema.validate(record, RESULTS_SCHEMA)

    splits = record["splits"]
    names = [m["name"] for m in record["methods"]]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    width = 0.8 / max(1, len(splits))
    xs = np.arange(len(names))
    for metric, ax in zip(("mse", "dssim"), axes):
        for k, split in enumerate(splits):
            vals = [m["scores"].get(split, {}).get(metric, float("nan")) for m in record["methods"]]
            ax.bar(xs + k * width, vals, width, label=split)
        ax.set_xticks(xs + width * (len(splits) - 1) / 2)
        ax.set_xticklabels(names, rotation=20, ha="right")
        ax.set_title(metric.upper())
        ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, format="svg")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lumisphere",
        description="Reflectance-map toolkit: synthesize data, reconstruct maps, score, edit, serve.",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    sp.add_argument("--out", required=True, help="output dataset directory")
    sp.add_argument("--config", help="flat TOML config file (flags override it)")
    sp.add_argument("--samples", type=int, help="item count (default 500)")
    sp.add_argument("--seed", type=int, help="master seed (default 0)")
    sp.add_argument("--rm-resolution", dest="rm_resolution", type=int, help="map resolution (default 32)")
    sp.add_argument("--image-size", dest="image_size", type=int, help="rendered image side (default 96)")
    sp.add_argument("--mc-samples", dest="mc_samples", type=int, help="integration samples per cell (default 1024)")
    sp.add_argument("--split-fraction", dest="split_fraction", type=float, help="train fraction (default 0.5)")
    sp.add_argument("--assets", help=f"asset directory (default ${ASSETS_ENV} or builtin)")
    sp.add_argument("--env-count", dest="env_count", type=int, help="builtin environment count (default 4)")
    sp.set_defaults(func=cmd_synth)

    rp = sub.add_parser("reconstruct", help="predict reflectance maps for a dataset")
    rp.add_argument("--dataset", required=True)
    rp.add_argument(
        "--method",
        action="append",
        required=True,
        help="method spec 'name:kind[,key=value...]', e.g. rbf:indirect_rbf,sigma=8 "
        "(kinds: gt, indirect_rbf, indirect_sparse_external, direct_external, sh, gt_normals)",
    )
    rp.add_argument("--emit-sparse", action="store_true", help="also write sparse tensor blocks")
    rp.set_defaults(func=cmd_reconstruct)

    ep = sub.add_parser("eval", help="score stored predictions against ground truth")
    ep.add_argument("--dataset", required=True)
    ep.add_argument("--method", action="append", required=True, help="prediction names, in table order")
    ep.add_argument("--split", action="append", default=None, help="train/test/all (default all)")
    ep.add_argument("--rm", choices=("display", "linear"), default="display", help="ground-truth variant (default display)")
    ep.add_argument("--out", help="write the JSON record (and .run sidecar) here")
    ep.set_defaults(func=cmd_eval)

    tp = sub.add_parser("transfer", help="swap the reflectance map of a dataset item")
    tp.add_argument("--dataset", required=True)
    tp.add_argument("--item", required=True)
    tp.add_argument("--rm-from", dest="rm_from", help="donor item id")
    tp.add_argument("--rm-file", dest="rm_file", help="donor map as PFM (with mask sidecar)")
    tp.add_argument("--out", required=True, help="output image (.png or .pfm)")
    tp.set_defaults(func=cmd_transfer)

    hp = sub.add_parser("reshade", help="re-render a dataset item with new normals")
    hp.add_argument("--dataset", required=True)
    hp.add_argument("--item", required=True)
    hp.add_argument("--normals", required=True, help="replacement normal map PFM")
    hp.add_argument("--out", required=True, help="output image (.png or .pfm)")
    hp.set_defaults(func=cmd_reshade)

    vp = sub.add_parser("serve", help="run the interactive edit service")
    vp.add_argument("--port", type=int, default=8008)
    vp.add_argument("--host", default="127.0.0.1")
    vp.add_argument("--dataset", help="serve sessions from this dataset (default: builtin demo)")
    vp.add_argument("--items", help="comma-separated item ids to open as sessions")
    vp.add_argument("--static", help="optional static frontend directory to mount at /")
    vp.set_defaults(func=cmd_serve)

    pp = sub.add_parser("plot", help="render score distributions from an eval record to SVG")
    pp.add_argument("--results", required=True)
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_plot)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "split", "sentinel") is None:
        args.split = ["all"]
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
