"""Command-line pipeline: extract, synth, stats, train, eval, dtw, bench.

Config-file first: a TOML or JSON file holds one table per subcommand and
explicit flags override it.  Structured logs go to stderr only; machine
output is JSON on stdout or in files named by flags, so pipelines stay
composable.

Exit codes: 0 success (including partial extract), 1 usage error, 2 total
failure, 3 internal invariant violation.
"""

from __future__ import annotations

import json
import logging
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, JSONL_FORMAT_VERSION
from .bitstream import (
    extract_frame_sizes,
    read_series_jsonl,
    write_series_csv,
    write_series_jsonl,
)
from .dataset import (
    ALL_PRESETS,
    build_dataset,
    evaluate,
    generate_preset_clips,
    majority_vote,
    stratified_split_series,
)
from .dtw import Cost, DtwConfig, knn_classify
from .errors import BitcoverError
from .model import (
    ModelConfig,
    TrainConfig,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .model.checkpoint import CHECKPOINT_VERSION
from .series import TENSOR_VERSION, read_tensor
from .stats import build_kld_matrix

log = logging.getLogger("bitcover")


class TotalFailure(BitcoverError):
    """Every input failed; maps to exit code 2."""


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_bytes()
    if path.endswith(".json"):
        return json.loads(text)
    try:
        import tomllib  # py311+
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text.decode("utf-8"))


def _resolve(ctx: click.Context, **flags) -> dict:
    """Merge file config under explicit flags and log the resolved values."""
    section = ctx.command.name
    merged = dict(flags)
    file_cfg = (ctx.obj.get("file_config") or {}).get(section, {})
    for key, value in file_cfg.items():
        key = key.replace("-", "_")
        if key not in merged:
            continue
        source = ctx.get_parameter_source(key)
        if source is not None and source.name != "COMMANDLINE":
            merged[key] = value
    log.info("resolved %s config: %s", section, json.dumps(merged, default=str, sort_keys=True))
    return merged


def _parse_labeled(data: tuple[str, ...]) -> dict[str, list]:
    """Parse repeated label=path.jsonl options into {label: [series...]}."""
    labeled: dict[str, list] = {}
    for item in data:
        if "=" not in item:
            raise click.UsageError(f"--data needs label=path.jsonl, got {item!r}")
        label, _, path = item.partition("=")
        labeled.setdefault(label, []).extend(read_series_jsonl(path))
    return labeled


def _int_triple(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.replace(" ", "").split(",")]
    if len(parts) != 3:
        raise click.UsageError(f"expected three comma-separated integers, got {text!r}")
    return tuple(parts)  # type: ignore[return-value]


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, sort_keys=True))


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML/JSON config file; explicit flags override it.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads for per-file extraction.")
@click.option("--log-level", type=click.Choice(["debug", "info", "warning", "error"]),
              default="info", show_default=True)
@click.option("--version", is_flag=True, is_eager=True, expose_value=False,
              callback=lambda ctx, p, v: _print_version(ctx) if v else None,
              help="Print package and file-format versions.")
@click.pass_context
def cli(ctx, config_path, seed, threads, log_level):
    """Classify video content from compressed-bitstream statistics."""
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, log_level.upper()),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    ctx.obj = {
        "file_config": _load_config_file(config_path),
        "seed": seed,
        "threads": threads,
    }


def _print_version(ctx: click.Context) -> None:
    click.echo(
        f"bitcover {__version__} "
        f"(jsonl v{JSONL_FORMAT_VERSION}, tensor v{TENSOR_VERSION}, "
        f"checkpoint v{CHECKPOINT_VERSION})"
    )
    ctx.exit(0)


@cli.command()
@click.argument("inputs", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="JSONL file, or directory for CSV output.")
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]),
              default="jsonl", show_default=True)
@click.pass_context
def extract(ctx, inputs, out_path, fmt):
    """Extract frame-size series from Annex B files (no decoding)."""
    opts = _resolve(ctx, inputs=list(inputs), out_path=out_path, fmt=fmt)
    files: list[Path] = []
    for item in opts["inputs"]:
        p = Path(item)
        if p.is_dir():
            files.extend(sorted(q for q in p.iterdir()
                                if q.suffix.lower() in (".264", ".h264")))
        else:
            files.append(p)
    if not files:
        raise TotalFailure("no input files found")

    t0 = time.perf_counter()
    threads = ctx.obj["threads"]
    results: list = []
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        def safe(path):
            try:
                return extract_frame_sizes(path)
            except (BitcoverError, OSError) as exc:
                return exc

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(safe, files))
    else:
        for path in files:
            try:
                results.append(extract_frame_sizes(path))
            except (BitcoverError, OSError) as exc:
                results.append(exc)

    errors = []
    series_list = []
    for path, res in zip(files, results):
        if isinstance(res, Exception):
            errors.append({"file": str(path), "error": str(res)})
            log.warning("failed %s: %s", path, res)
        else:
            series_list.append(res)
    if not series_list:
        raise TotalFailure(f"all {len(files)} input(s) failed")

    out = Path(opts["out_path"])
    if opts["fmt"] == "jsonl":
        write_series_jsonl(series_list, out)
    else:
        out.mkdir(parents=True, exist_ok=True)
        for series in series_list:
            write_series_csv(series, out / (Path(series.source_id).stem + ".csv"))
    wall = time.perf_counter() - t0
    frames_total = sum(len(s) for s in series_list)
    bytes_total = sum(sum(s.values) for s in series_list) // 8
    _emit({
        "files": len(series_list),
        "failed": errors,
        "frames_total": frames_total,
        "bytes_total": bytes_total,
        "wall_seconds": wall,
        "frames_per_second": frames_total / wall if wall > 0 else None,
    })


@cli.command()
@click.option("--preset", type=click.Choice(sorted(ALL_PRESETS)), required=True)
@click.option("--clips", type=int, default=10, show_default=True)
@click.option("--frames", type=int, default=3000, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--target-bitrate", type=float, default=None,
              help="CBR target in bits per frame (leaky-bucket emulation).")
@click.pass_context
def synth(ctx, preset, clips, frames, out_path, target_bitrate):
    """Generate synthetic frame-size series for one class preset."""
    opts = _resolve(ctx, preset=preset, clips=clips, frames=frames,
                    out_path=out_path, target_bitrate=target_bitrate)
    series = generate_preset_clips(
        opts["preset"], opts["clips"], opts["frames"],
        base_seed=ctx.obj["seed"], target_bitrate=opts["target_bitrate"],
    )
    out = Path(opts["out_path"])
    if out.is_dir() or str(opts["out_path"]).endswith(("/", "\\")):
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{opts['preset']}.jsonl"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_series_jsonl(series, out)
    _emit({"preset": opts["preset"], "clips": len(series),
           "frames_per_clip": opts["frames"], "out": str(out)})


@cli.command()
@click.option("--data", multiple=True, required=True,
              help="label=path.jsonl; repeat per class.")
@click.option("--bins", type=int, default=64, show_default=True)
@click.option("--out-csv", type=click.Path(), default=None)
@click.option("--out-json", type=click.Path(), default=None)
@click.pass_context
def stats(ctx, data, bins, out_csv, out_json):
    """Inter/intra-class KLD matrix over clip frame-size histograms."""
    opts = _resolve(ctx, data=list(data), bins=bins, out_csv=out_csv, out_json=out_json)
    labeled = _parse_labeled(tuple(opts["data"]))
    clips_by_class = {label: [s.values for s in ss] for label, ss in sorted(labeled.items())}
    matrix = build_kld_matrix(clips_by_class, bins=opts["bins"])
    if opts["out_csv"]:
        Path(opts["out_csv"]).write_text(matrix.to_csv(), encoding="utf-8")
    report = matrix.report()
    if opts["out_json"]:
        Path(opts["out_json"]).write_text(json.dumps(report, sort_keys=True), encoding="utf-8")
    _emit(report)


def _predict_parallel(params, windows, threads: int):
    """Chunked eval-mode inference; results concatenate in input order, so
    the output is identical to the single-threaded path."""
    if threads <= 1 or windows.shape[0] < 2 * threads:
        return predict(params, windows)
    from concurrent.futures import ThreadPoolExecutor

    bounds = np.linspace(0, windows.shape[0], threads + 1, dtype=int)
    chunks = [windows[a:b] for a, b in zip(bounds, bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda chunk: predict(params, chunk), chunks))
    probs = np.concatenate([p.probs for p in parts], axis=0)
    from .model import Prediction

    return Prediction(probs=probs, predicted_class=np.argmax(probs, axis=1))


def _load_or_build(tensor_path, data, window_len, stride, ctx, split_val=None):
    """Either read a .bcdt tensor or window labeled JSONL series.

    With split_val set, JSONL input is split at clip level and two tensors
    come back; tensor input returns (tensor, None).
    """
    if tensor_path:
        return read_tensor(tensor_path), None
    if not data:
        raise click.UsageError("give either --tensor or --data label=path.jsonl")
    labeled = _parse_labeled(tuple(data))
    if split_val:
        train_series, val_series = stratified_split_series(
            labeled, 1.0 - split_val, ctx.obj["seed"]
        )
        return (
            build_dataset(train_series, window_len, stride),
            build_dataset(val_series, window_len, stride),
        )
    return build_dataset(labeled, window_len, stride), None


@cli.command(name="train")
@click.option("--tensor", "tensor_path", type=click.Path(exists=True), default=None,
              help="Pre-built training tensor (.bcdt).")
@click.option("--val-tensor", type=click.Path(exists=True), default=None)
@click.option("--data", multiple=True, help="label=path.jsonl; repeat per class.")
@click.option("--window-len", type=int, default=240, show_default=True)
@click.option("--stride", type=int, default=None)
@click.option("--val-fraction", type=float, default=0.2, show_default=True)
@click.option("--filters", default="256,512,512", show_default=True)
@click.option("--kernels", default="8,5,3", show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--min-lr", type=float, default=1e-4, show_default=True)
@click.option("--lr-patience", type=int, default=40, show_default=True)
@click.option("--early-stop-patience", type=int, default=80, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--max-epochs", type=int, default=500, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--history", "history_path", type=click.Path(), default=None,
              help="Write per-epoch JSONL history here.")
@click.pass_context
def train_cmd(ctx, tensor_path, val_tensor, data, window_len, stride, val_fraction,
              filters, kernels, lr, min_lr, lr_patience, early_stop_patience,
              batch_size, max_epochs, out_path, history_path):
    """Train the residual classifier on labeled series or tensors."""
    opts = _resolve(ctx, tensor_path=tensor_path, val_tensor=val_tensor,
                    data=list(data), window_len=window_len, stride=stride,
                    val_fraction=val_fraction, filters=filters, kernels=kernels,
                    lr=lr, min_lr=min_lr, lr_patience=lr_patience,
                    early_stop_patience=early_stop_patience, batch_size=batch_size,
                    max_epochs=max_epochs, out_path=out_path, history_path=history_path)

    if opts["tensor_path"]:
        train_tensor = read_tensor(opts["tensor_path"])
        if not opts["val_tensor"]:
            raise click.UsageError("--val-tensor is required with --tensor input")
        val_tensor_ds = read_tensor(opts["val_tensor"])
    else:
        train_tensor, val_tensor_ds = _load_or_build(
            None, opts["data"], opts["window_len"], opts["stride"], ctx,
            split_val=opts["val_fraction"],
        )

    model_cfg = ModelConfig(
        input_len=train_tensor.window_len,
        num_classes=train_tensor.num_classes,
        channels=train_tensor.channels,
        block_filters=_int_triple(opts["filters"]),
        kernel_sizes=_int_triple(opts["kernels"]),
        seed=ctx.obj["seed"],
    )
    train_cfg = TrainConfig(
        initial_lr=opts["lr"],
        min_lr=opts["min_lr"],
        lr_patience=opts["lr_patience"],
        early_stop_patience=opts["early_stop_patience"],
        batch_size=opts["batch_size"],
        max_epochs=opts["max_epochs"],
        validation_fraction=opts["val_fraction"],
        seed=ctx.obj["seed"],
    )
    log.info("model config: %s", model_cfg.to_dict())
    log.info("train config: %s", train_cfg.to_dict())

    params, history = train(
        model_cfg, train_cfg,
        train_tensor.windows, train_tensor.labels,
        val_tensor_ds.windows, val_tensor_ds.labels,
    )
    save_checkpoint(params, opts["out_path"])
    if opts["history_path"]:
        with open(opts["history_path"], "w", encoding="utf-8") as fh:
            for row in history:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    best = min(history, key=lambda r: r["val_loss"])
    _emit({
        "epochs": len(history),
        "best_epoch": best["epoch"],
        "best_val_loss": best["val_loss"],
        "best_val_acc": best["val_acc"],
        "checkpoint": str(opts["out_path"]),
    })


@cli.command(name="eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--tensor", "tensor_path", type=click.Path(exists=True), default=None)
@click.option("--data", multiple=True, help="label=path.jsonl; repeat per class.")
@click.option("--window-len", type=int, default=240, show_default=True)
@click.option("--stride", type=int, default=None)
@click.option("--clip-vote", is_flag=True,
              help="Aggregate window predictions per clip by majority vote.")
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.pass_context
def eval_cmd(ctx, model_path, tensor_path, data, window_len, stride, clip_vote, report_path):
    """Classify a labeled set and report confusion/precision/recall."""
    opts = _resolve(ctx, model_path=model_path, tensor_path=tensor_path,
                    data=list(data), window_len=window_len, stride=stride,
                    clip_vote=clip_vote, report_path=report_path)
    params = load_checkpoint(opts["model_path"])
    tensor, _ = _load_or_build(opts["tensor_path"], opts["data"],
                               opts["window_len"], opts["stride"], ctx)
    pred = _predict_parallel(params, tensor.windows, ctx.obj["threads"])
    true = tensor.label_indices()
    if opts["clip_vote"]:
        if not tensor.origins:
            raise click.UsageError("--clip-vote needs window origins (JSONL input)")
        clip_ids = [origin[0] for origin in tensor.origins]
        ids, voted = majority_vote(clip_ids, pred.predicted_class.tolist())
        clip_true = {cid: int(t) for cid, t in zip(clip_ids, true)}
        report = evaluate(voted, [clip_true[cid] for cid in ids], tensor.class_names)
    else:
        report = evaluate(pred.predicted_class.tolist(), true.tolist(), tensor.class_names)
    payload = report.to_dict()
    if opts["report_path"]:
        Path(opts["report_path"]).write_text(json.dumps(payload, sort_keys=True),
                                             encoding="utf-8")
    _emit(payload)


@cli.command(name="dtw")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True),
              help="Training tensor (.bcdt).")
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.option("--radius", type=int, default=None, help="Sakoe-Chiba band radius.")
@click.option("--cost", type=click.Choice(["abs", "squared"]), default="abs",
              show_default=True)
@click.option("-k", "k_neighbors", type=int, default=1, show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.pass_context
def dtw_cmd(ctx, train_path, test_path, radius, cost, k_neighbors, report_path):
    """1-NN DTW baseline classification of a test tensor."""
    opts = _resolve(ctx, train_path=train_path, test_path=test_path, radius=radius,
                    cost=cost, k_neighbors=k_neighbors, report_path=report_path)
    train_tensor = read_tensor(opts["train_path"])
    test_tensor = read_tensor(opts["test_path"])
    cfg = DtwConfig(window_radius=opts["radius"], cost=Cost(opts["cost"]))
    train_vectors = [w[:, 0].tolist() for w in train_tensor.windows]
    train_labels = train_tensor.label_indices().tolist()

    t0 = time.perf_counter()
    preds = [
        knn_classify(train_vectors, train_labels, w[:, 0].tolist(),
                     k=opts["k_neighbors"], cfg=cfg)
        for w in test_tensor.windows
    ]
    wall = time.perf_counter() - t0
    report = evaluate(preds, test_tensor.label_indices().tolist(),
                      test_tensor.class_names)
    payload = report.to_dict()
    payload["wall_seconds"] = wall
    payload["windows_per_second"] = len(preds) / wall if wall > 0 else None
    if opts["report_path"]:
        Path(opts["report_path"]).write_text(json.dumps(payload, sort_keys=True),
                                             encoding="utf-8")
    _emit(payload)


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--tensor", "tensor_path", required=True, type=click.Path(exists=True))
@click.option("--batch-size", type=int, default=5, show_default=True)
@click.option("--with-dtw", is_flag=True, help="Also time a DTW pass on the same data.")
@click.option("--dtw-train", type=click.Path(exists=True), default=None,
              help="Training tensor for the DTW pass (defaults to --tensor).")
@click.option("--dtw-queries", type=int, default=None,
              help="Limit DTW timing to the first N windows.")
@click.pass_context
def bench(ctx, model_path, tensor_path, batch_size, with_dtw, dtw_train, dtw_queries):
    """Measure end-to-end classification throughput (frames/second)."""
    opts = _resolve(ctx, model_path=model_path, tensor_path=tensor_path,
                    batch_size=batch_size, with_dtw=with_dtw, dtw_train=dtw_train,
                    dtw_queries=dtw_queries)
    params = load_checkpoint(opts["model_path"])
    tensor = read_tensor(opts["tensor_path"])
    if tensor.num_windows == 0:
        _emit({"windows": 0, "frames_total": 0})
        return

    # warm pass so one-time allocation noise stays out of the measurement
    predict(params, tensor.windows[:1], batch_size=1)
    t0 = time.perf_counter()
    pred = predict(params, tensor.windows, batch_size=opts["batch_size"])
    wall = time.perf_counter() - t0
    frames_total = tensor.num_windows * tensor.window_len
    fps = frames_total / wall if wall > 0 else float("inf")
    payload = {
        "windows": tensor.num_windows,
        "window_len": tensor.window_len,
        "frames_total": frames_total,
        "wall_seconds": wall,
        "frames_per_second": fps,
        "real_time_factor_30fps": fps / 30.0,
        "predicted_class_histogram": np.bincount(
            pred.predicted_class, minlength=tensor.num_classes
        ).tolist(),
    }

    if opts["with_dtw"]:
        train_tensor = read_tensor(opts["dtw_train"]) if opts["dtw_train"] else tensor
        train_vectors = [w[:, 0].tolist() for w in train_tensor.windows]
        train_labels = train_tensor.label_indices().tolist()
        queries = tensor.windows
        if opts["dtw_queries"]:
            queries = queries[:opts["dtw_queries"]]
        t0 = time.perf_counter()
        for w in queries:
            knn_classify(train_vectors, train_labels, w[:, 0].tolist(), k=1)
        dtw_wall = time.perf_counter() - t0
        dtw_wps = len(queries) / dtw_wall if dtw_wall > 0 else float("inf")
        neural_wps = tensor.num_windows / wall if wall > 0 else float("inf")
        payload["dtw"] = {
            "queries": len(queries),
            "wall_seconds": dtw_wall,
            "windows_per_second": dtw_wps,
            "speed_ratio_neural_over_dtw": neural_wps / dtw_wps if dtw_wps else None,
        }
    _emit(payload)


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping exceptions onto the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except (TotalFailure,) as exc:
        log.error("%s", exc)
        return 2
    except (BitcoverError, OSError) as exc:
        log.error("%s", exc)
        return 2
    except Exception:  # pragma: no cover - internal invariant violations
        log.exception("internal error")
        return 3


if __name__ == "__main__":
    sys.exit(main())
