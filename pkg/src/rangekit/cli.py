"""Command-line entry point: experiment runs, sweeps, and self-checks.

Verbs:
  run <manifest>                 train every variant, write CSV/JSON reports
  sweep-tail <manifest> --ratios train each loss mode across tail cut ratios
  check [--seed N]               run the numeric self-check suite
  export-dataset <spec> <path>   generate a dataset and write it as text

Experiments are described by a JSON manifest (see the README for the
schema). All per-variant randomness derives from the manifest's global
seed hashed with the variant name, so adding a variant never perturbs
the others. Set RANGEKIT_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import data, losses, network, trainer
from .geometry import EmbeddingBatch, min_center_pair, pairwise_sq_distances, top_k_ranges

log = logging.getLogger("rangekit.cli")

MANIFEST_SCHEMA_VERSION = 1
CSV_HEADER = ",".join(trainer.METRICS_FIELDS)
COMPARISON_HEADER = (
    "variant,loss_mode,cut_ratio,verification_accuracy,"
    "mean_intra_range,min_center_sqdist,total_loss"
)
SWEEP_HEADER = "loss_mode,cut_ratio,verification_accuracy,mean_intra_range,min_center_sqdist"


def derive_seed(global_seed: int, *tags: str) -> int:
    """Stable per-variant seed: low 4 bytes of sha256(global_seed | tags)."""
    text = f"{global_seed}|" + "|".join(tags)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")


# ---------------------------------------------------------------------------
# manifest handling


def load_manifest(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"manifest is not valid JSON: {exc}") from exc
    errors = []
    if not isinstance(manifest, dict):
        raise ValueError("manifest must be a JSON object")
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        errors.append(f"schema_version must be {MANIFEST_SCHEMA_VERSION}")
    if not isinstance(manifest.get("name"), str) or not manifest.get("name"):
        errors.append("name must be a non-empty string")
    if not isinstance(manifest.get("global_seed"), int):
        errors.append("global_seed must be an integer")
    variants = manifest.get("variants")
    if not isinstance(variants, list) or not variants:
        errors.append("variants must be a non-empty list")
    else:
        names = []
        for i, var in enumerate(variants):
            if not isinstance(var, dict) or not isinstance(var.get("name"), str):
                errors.append(f"variants[{i}] must be an object with a 'name'")
            else:
                names.append(var["name"])
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            errors.append(f"variant names must be unique, repeated: {sorted(dupes)}")
    if "defaults" in manifest and not isinstance(manifest["defaults"], dict):
        errors.append("defaults must be an object")
    if errors:
        raise ValueError("invalid manifest: " + "; ".join(errors))
    return manifest


def _merge(base: dict, overlay: dict) -> dict:
    out = dict(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def variant_config(manifest: dict, variant: dict) -> trainer.TrainConfig:
    """Build a TrainConfig for one variant, deriving any seed the manifest
    does not pin explicitly."""
    merged = _merge(manifest.get("defaults", {}), {k: v for k, v in variant.items() if k != "name"})
    gseed = manifest["global_seed"]
    name = variant["name"]
    merged.setdefault("dataset", {})
    merged.setdefault("batch", {})
    if isinstance(merged["dataset"], dict):
        merged["dataset"].setdefault("seed", derive_seed(gseed, name, "data"))
    if isinstance(merged["batch"], dict):
        merged["batch"].setdefault("seed", derive_seed(gseed, name, "batch"))
    merged.setdefault("init_seed", derive_seed(gseed, name, "init"))
    merged.setdefault("eval_seed", derive_seed(gseed, name, "eval"))
    merged.setdefault("truncate_seed", derive_seed(gseed, name, "truncate"))
    try:
        return trainer.config_from_dict(merged)
    except ValueError as exc:
        raise ValueError(f"variant {name!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# report writing


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(records, path) -> None:
    lines = [CSV_HEADER]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, f)) for f in trainer.METRICS_FIELDS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_summary(path, *, name, config, result, aborted=False, abort_info=None) -> None:
    final = None
    if result is not None and result.records:
        final = {f: getattr(result.records[-1], f) for f in trainer.METRICS_FIELDS}
    payload = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "variant": name,
        "config": trainer.config_to_dict(config),
        "n_classes": result.n_classes if result is not None else None,
        "resolved_margin": result.resolved_margin if result is not None else None,
        "resolved_contrastive_margin": (
            result.resolved_contrastive_margin if result is not None else None
        ),
        "resolved_triplet_margin": result.resolved_triplet_margin if result is not None else None,
        "final_record": final,
        "aborted": aborted,
        "abort_info": abort_info,
        "wall_time_s": result.wall_time_s if result is not None else None,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _final_row(name, config, result) -> str:
    rec = result.records[-1] if result.records else None
    return ",".join(
        [
            name,
            config.loss_mode,
            _fmt(config.cut_ratio),
            _fmt(rec.verification_accuracy if rec else float("nan")),
            _fmt(rec.mean_intra_range if rec else float("nan")),
            _fmt(rec.min_center_sqdist if rec else float("nan")),
            _fmt(rec.total_loss if rec else float("nan")),
        ]
    )


# ---------------------------------------------------------------------------
# run / sweep-tail


def _prepare_variant_dir(out_dir: Path, name: str, force: bool) -> Path:
    vdir = out_dir / name
    if vdir.exists() and any(vdir.iterdir()):
        if not force:
            raise FileExistsError(f"{vdir} already has output; pass --force to overwrite")
    vdir.mkdir(parents=True, exist_ok=True)
    return vdir


def _run_variant(name: str, config: trainer.TrainConfig, vdir: Path):
    config.checkpoint_path = str(vdir / "final.ckpt")
    try:
        result = trainer.train(config)
    except trainer.TrainingAborted as exc:
        write_metrics_csv(exc.records, vdir / "metrics.csv")
        write_summary(
            vdir / "summary.json",
            name=name,
            config=config,
            result=None,
            aborted=True,
            abort_info={"iteration": exc.iteration, "diagnostic": exc.diagnostic},
        )
        return None
    write_metrics_csv(result.records, vdir / "metrics.csv")
    write_summary(vdir / "summary.json", name=name, config=config, result=result)
    return result


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    out_dir = Path(args.out) if args.out else Path(manifest.get("output_dir", manifest["name"]))
    variants = manifest["variants"]
    configs = {v["name"]: variant_config(manifest, v) for v in variants}
    dirs = {}
    for v in variants:
        try:
            dirs[v["name"]] = _prepare_variant_dir(out_dir, v["name"], args.force)
        except FileExistsError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2

    results = {}
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            futures = {
                name: pool.submit(_run_variant, name, configs[name], dirs[name])
                for name in configs
            }
            results = {name: fut.result() for name, fut in futures.items()}
    else:
        for name in configs:
            log.info("training variant %s", name)
            results[name] = _run_variant(name, configs[name], dirs[name])

    rows = [COMPARISON_HEADER]
    failed = []
    for v in variants:  # manifest order
        name = v["name"]
        if results[name] is None:
            failed.append(name)
            continue
        rows.append(_final_row(name, configs[name], results[name]))
    (out_dir / "comparison.csv").write_text("\n".join(rows) + "\n", encoding="ascii")
    for row in rows:
        print(row)
    if failed:
        print(f"error: variants aborted: {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep_tail(args) -> int:
    manifest = load_manifest(args.manifest)
    ratios = args.ratios
    if any(not 0.0 <= r <= 1.0 for r in ratios):
        print("error: ratios must lie in [0, 1]", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else Path(manifest.get("output_dir", manifest["name"]))
    rows = [SWEEP_HEADER]
    for variant in manifest["variants"]:
        for ratio in ratios:
            sub = dict(variant)
            sub["cut_ratio"] = ratio
            config = variant_config(manifest, sub)
            name = f"{variant['name']}__tail{ratio:g}"
            try:
                vdir = _prepare_variant_dir(out_dir, name, args.force)
            except FileExistsError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 2
            log.info("sweep variant %s", name)
            result = _run_variant(name, config, vdir)
            if result is None:
                print(f"error: variant {name} aborted", file=sys.stderr)
                return 1
            rec = result.records[-1] if result.records else None
            rows.append(
                ",".join(
                    [
                        config.loss_mode,
                        _fmt(ratio),
                        _fmt(rec.verification_accuracy if rec else float("nan")),
                        _fmt(rec.mean_intra_range if rec else float("nan")),
                        _fmt(rec.min_center_sqdist if rec else float("nan")),
                    ]
                )
            )
    (out_dir / "sweep.csv").write_text("\n".join(rows) + "\n", encoding="ascii")
    for row in rows:
        print(row)
    return 0


# ---------------------------------------------------------------------------
# export-dataset


def cmd_export_dataset(args) -> int:
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        spec = data.DatasetSpec(**raw)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        print(f"error: bad dataset spec: {exc}", file=sys.stderr)
        return 2
    dataset = data.generate(spec)
    data.save_dataset(dataset, args.path)
    print(f"wrote {dataset.n_samples} samples, {len(dataset.identities)} identities to {args.path}")
    return 0


# ---------------------------------------------------------------------------
# check: the numeric self-check suite


def _random_batch(rng, n_ids=(3, 6), group=(2, 8), dim=8, scale=1.0) -> EmbeddingBatch:
    k = int(rng.integers(n_ids[0], n_ids[1] + 1))
    labels = []
    for ident in range(k):
        labels.extend([ident] * int(rng.integers(group[0], group[1] + 1)))
    emb = scale * rng.standard_normal((len(labels), dim))
    return EmbeddingBatch(emb, labels)


def _check_geometry(seed: int):
    """Brute-force double-loop enumeration vs the geometry kernels."""
    rng = np.random.default_rng(seed)
    for trial in range(50):
        batch = _random_batch(rng)
        x = batch.embeddings
        dmat = pairwise_sq_distances(x)
        for i in range(batch.size):
            for j in range(batch.size):
                ref = sum((x[i, c] - x[j, c]) ** 2 for c in range(batch.dim))
                if abs(dmat[i, j] - ref) > 1e-9 * max(1.0, ref):
                    return False, f"trial {trial}: distance ({i},{j}) off", _geometry_payload(batch, seed)
        for ident, rows in batch.groups.items():
            stat = top_k_ranges(x[rows], 2, identity=ident)
            pairs = [
                (float(dmat[rows[a], rows[b]]), a, b)
                for a in range(len(rows))
                for b in range(a + 1, len(rows))
            ]
            pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
            want = pairs[: len(stat.ranges)]
            got = list(zip(stat.ranges, (p[0] for p in stat.pairs), (p[1] for p in stat.pairs)))
            if any(
                abs(w[0] - g[0]) > 1e-12 * max(1.0, w[0]) or w[1:] != g[1:]
                for w, g in zip(want, got)
            ):
                return False, f"trial {trial}: top ranges of identity {ident} differ", _geometry_payload(batch, seed)
        cp = min_center_pair(batch)
        best = None
        ids = batch.identities
        for a_pos, a in enumerate(ids):
            for b in ids[a_pos + 1 :]:
                ca = x[batch.groups[a]].mean(axis=0)
                cb = x[batch.groups[b]].mean(axis=0)
                sq = float(((ca - cb) ** 2).sum())
                if best is None or sq < best[0]:
                    best = (sq, a, b)
        if (cp.identity_a, cp.identity_b) != best[1:] or abs(cp.sq_distance - best[0]) > 1e-12 * max(1.0, best[0]):
            return False, f"trial {trial}: closest center pair differs", _geometry_payload(batch, seed)
    return True, "50 random batches match brute force", None


def _geometry_payload(batch, seed):
    return {
        "check": "geometry",
        "embeddings": batch.embeddings.tolist(),
        "labels": batch.labels,
        "seed": seed,
    }


def _grad_case_error(kind: str, batch: EmbeddingBatch, step: float) -> float:
    if kind == "intra":
        analytic = losses.intra_range_loss(batch, 2).grads
        numeric = losses.finite_difference_grad(lambda b: losses.intra_range_loss(b, 2).value, batch, step)
    elif kind == "inter":
        margin = min_center_pair(batch).sq_distance * 2.0
        analytic = losses.inter_range_loss(batch, margin).grads
        numeric = losses.finite_difference_grad(
            lambda b: losses.inter_range_loss(b, margin).value, batch, step
        )
    else:
        raise ValueError(kind)
    return losses.relative_gradient_error(analytic, numeric)


def _check_loss_gradients(seed: int):
    """Central finite differences vs every analytic loss gradient."""
    rng = np.random.default_rng(seed)
    step, tol = 1e-5, 1e-5
    for trial in range(8):
        batch = _random_batch(rng)
        for kind in ("intra", "inter"):
            err = _grad_case_error(kind, batch, step)
            if err > tol:
                payload = {
                    "check": "loss_grad",
                    "kind": kind,
                    "embeddings": batch.embeddings.tolist(),
                    "labels": batch.labels,
                    "step": step,
                    "offset": losses._INTRA_GRAD_TEST_OFFSET,
                }
                return False, f"trial {trial}: {kind} gradient rel. error {err:.2e}", payload
        logits = rng.standard_normal((6, 5))
        labels = rng.integers(0, 5, size=6)
        _, dlogits = losses.softmax_xent(logits, labels)
        num = np.zeros_like(logits)
        for i in range(logits.shape[0]):
            for j in range(logits.shape[1]):
                up, down = logits.copy(), logits.copy()
                up[i, j] += step
                down[i, j] -= step
                num[i, j] = (
                    losses.softmax_xent(up, labels)[0] - losses.softmax_xent(down, labels)[0]
                ) / (2 * step)
        err = losses.relative_gradient_error(dlogits, num)
        if err > tol:
            return False, f"trial {trial}: softmax gradient rel. error {err:.2e}", None
    return True, "intra/inter/softmax gradients match finite differences", None


def _check_pairwise_losses(seed: int):
    """Finite differences for the contrastive and triplet baselines."""
    rng = np.random.default_rng(seed)
    step, tol = 1e-5, 1e-5
    for trial in range(5):
        pts = rng.standard_normal((6, 4))
        margin = 2.0
        pairs = [(pts[0], pts[1], True), (pts[2], pts[3], False), (pts[4], pts[5], False)]
        res = losses.contrastive_loss(pairs, margin)
        flat = np.vstack([np.vstack((a, b)) for a, b, _ in pairs])
        flags = [s for _, _, s in pairs]

        def closs(x):
            ps = [(x[2 * i], x[2 * i + 1], flags[i]) for i in range(len(flags))]
            return losses.contrastive_loss(ps, margin).value

        num = _fd_rows(closs, flat, step)
        err = losses.relative_gradient_error(res.grads, num)
        if err > tol:
            return False, f"trial {trial}: contrastive gradient rel. error {err:.2e}", None
        trip = [(pts[0], pts[1], pts[2]), (pts[3], pts[4], pts[5])]
        tres = losses.triplet_loss(trip, margin)
        tflat = np.vstack([np.vstack(t) for t in trip])

        def tloss(x):
            ts = [(x[3 * i], x[3 * i + 1], x[3 * i + 2]) for i in range(len(trip))]
            return losses.triplet_loss(ts, margin).value

        tnum = _fd_rows(tloss, tflat, step)
        err = losses.relative_gradient_error(tres.grads, tnum)
        if err > tol:
            return False, f"trial {trial}: triplet gradient rel. error {err:.2e}", None
    return True, "contrastive/triplet gradients match finite differences", None


def _fd_rows(fn, x, step):
    out = np.zeros_like(x)
    work = x.copy()
    for i in range(work.shape[0]):
        for c in range(work.shape[1]):
            orig = work[i, c]
            work[i, c] = orig + step
            up = fn(work)
            work[i, c] = orig - step
            down = fn(work)
            work[i, c] = orig
            out[i, c] = (up - down) / (2 * step)
    return out


def _check_end_to_end(seed: int):
    """Parameter gradients of the full joint loss vs finite differences."""
    rng = np.random.default_rng(seed)
    shape = network.MlpShape(d_in=6, hidden=(10,), d_emb=5, n_classes=3)
    params = network.init_params(shape, seed)
    inputs = rng.standard_normal((9, 6))
    labels = np.repeat(np.arange(3), 3)
    cfg = losses.RangeLossConfig(margin=1.0, w_intra=0.3, w_inter=0.5)

    def total(p):
        cache, emb, logits = network.forward(p, inputs)
        batch = EmbeddingBatch(emb, labels.tolist())
        value, _ = losses.softmax_xent(logits, labels)
        return value + losses.range_loss(batch, cfg).value

    cache, emb, logits = network.forward(params, inputs)
    batch = EmbeddingBatch(emb, labels.tolist())
    _, dlogits = losses.softmax_xent(logits, labels)
    aux = losses.range_loss(batch, cfg)
    grads = network.backward(params, cache, aux.grads, dlogits)
    numeric = network.finite_difference_param_grads(total, params, 1e-4)
    worst = max(
        losses.relative_gradient_error(a, n)
        for (_, a), (_, n) in zip(grads.arrays(), numeric.arrays())
    )
    if worst > 1e-4:
        return False, f"parameter gradient rel. error {worst:.2e}", None
    return True, f"parameter gradients match finite differences (worst {worst:.1e})", None


def _check_sampler(seed: int):
    """P/K structure plus a 3-sigma uniformity bound on identity picks."""
    spec = data.DatasetSpec(seed=seed)
    dataset = data.generate(spec)
    bspec = data.BatchSpec(p=4, k=8, seed=seed)
    n_batches = 300
    batches = data.pk_batches(dataset, bspec, n_batches)
    counts = {i: 0 for i in dataset.identities}
    for bx, bl in batches:
        if bx.shape != (32, spec.d_in):
            return False, "batch shape wrong", {"check": "sampler", "seed": seed}
        uniq, freq = np.unique(bl, return_counts=True)
        if len(uniq) != 4 or set(freq.tolist()) != {8}:
            return False, "batch lacks 4 identities x 8 samples", {"check": "sampler", "seed": seed}
        for ident in uniq:
            counts[int(ident)] += 1
    p_hit = bspec.p / len(dataset.identities)
    mean = n_batches * p_hit
    sigma = (n_batches * p_hit * (1 - p_hit)) ** 0.5
    for ident, c in counts.items():
        if abs(c - mean) > 3 * sigma:
            return False, f"identity {ident} picked {c} times vs {mean:.1f}+-3x{sigma:.1f}", {
                "check": "sampler",
                "seed": seed,
            }
    return True, f"{n_batches} batches conform, selection within 3 sigma", None


CHECKS = (
    ("geometry-brute-force", _check_geometry),
    ("loss-gradients", _check_loss_gradients),
    ("pairwise-loss-gradients", _check_pairwise_losses),
    ("end-to-end-gradients", _check_end_to_end),
    ("pk-sampler", _check_sampler),
)


def cmd_check(args) -> int:
    if args.perturb_intra:
        losses.set_intra_grad_test_offset(args.perturb_intra)
    try:
        if args.replay:
            return _replay(args.replay)
        failures = 0
        replay_written = False
        for name, fn in CHECKS:
            ok, detail, payload = fn(args.seed)
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
            if not ok:
                failures += 1
                if payload is not None and not replay_written:
                    replay_path = Path(args.out or ".") / "replay_check.json"
                    replay_path.parent.mkdir(parents=True, exist_ok=True)
                    replay_path.write_text(json.dumps(payload, indent=2) + "\n")
                    print(f"first failing case written to {replay_path}")
                    replay_written = True
        return 1 if failures else 0
    finally:
        losses.set_intra_grad_test_offset(0.0)


def _replay(path) -> int:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload.get("check")
    if kind == "geometry":
        batch = EmbeddingBatch(np.array(payload["embeddings"]), payload["labels"])
        ok, detail, _ = _check_geometry(payload["seed"])
        print(f"[{'PASS' if ok else 'FAIL'}] geometry replay ({batch.size} samples): {detail}")
        return 0 if ok else 1
    if kind == "loss_grad":
        losses.set_intra_grad_test_offset(payload.get("offset", 0.0))
        batch = EmbeddingBatch(np.array(payload["embeddings"]), payload["labels"])
        err = _grad_case_error(payload["kind"], batch, payload["step"])
        ok = err <= 1e-5
        print(f"[{'PASS' if ok else 'FAIL'}] {payload['kind']} gradient replay: rel. error {err:.2e}")
        return 0 if ok else 1
    if kind == "sampler":
        ok, detail, _ = _check_sampler(payload["seed"])
        print(f"[{'PASS' if ok else 'FAIL'}] sampler replay: {detail}")
        return 0 if ok else 1
    print(f"error: unknown replay check {kind!r}", file=sys.stderr)
    return 2


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rangekit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train every variant of a manifest")
    p_run.add_argument("manifest")
    p_run.add_argument("--out", default=None, help="output directory (default: manifest name)")
    p_run.add_argument("--force", action="store_true", help="overwrite existing variant output")
    p_run.add_argument("--threads", type=int, default=1, help="variants trained in parallel")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep-tail", help="train variants across tail cut ratios")
    p_sweep.add_argument("manifest")
    p_sweep.add_argument("--ratios", type=float, nargs="+", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--force", action="store_true")
    p_sweep.set_defaults(fn=cmd_sweep_tail)

    p_check = sub.add_parser("check", help="run the numeric self-check suite")
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--out", default=None, help="directory for the replay file")
    p_check.add_argument("--replay", default=None, help="re-run a serialized failing case")
    p_check.add_argument(
        "--perturb-intra",
        type=float,
        default=0.0,
        help="test hook: bias one intra gradient entry to prove the check catches it",
    )
    p_check.set_defaults(fn=cmd_check)

    p_export = sub.add_parser("export-dataset", help="generate a dataset and write it as text")
    p_export.add_argument("spec", help="JSON file of dataset-spec fields")
    p_export.add_argument("path", help="output text file")
    p_export.set_defaults(fn=cmd_export_dataset)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("RANGEKIT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
