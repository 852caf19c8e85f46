"""Command-line pipeline driver.

Subcommands: synth, lbptop, pca {fit,apply}, pool, train-svm,
predict-svm, fuse-feat {train,predict}, fuse-bn {fit,infer},
island-demo, evaluate.  Every stage is deterministic given its flags
and --seed; usage errors exit 2, data errors exit 1 with a diagnostic
on stderr.
"""

import argparse
import csv
import sys

import numpy as np

from . import features, fusion, learn, metrics, synth
from .core import (CHANNELS, check_scores, check_volume, load_manifest,
                   read_tensor_array, write_tensor_array)
from .lbptop import LbpTopParams, lbp_top_descriptor


def _channel_matrix(manifest, channel, k=7):
    """Per-clip feature rows for one channel of a manifest.

    Rank-1 tensors are used as-is; a rank-2 tensor on the cnn channel is
    a per-frame score matrix and gets k-average pooled.
    """
    ids, rows = [], []
    for entry in manifest.entries:
        path = entry.paths.get(channel)
        if path is None:
            raise ValueError(f"clip {entry.clip_id!r} has no {channel} file")
        arr = read_tensor_array(path)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{path}: non-finite values in {channel} features")
        if arr.ndim == 2 and channel == "cnn":
            arr = features.k_average_pool(arr, k)
        elif arr.ndim != 1:
            raise ValueError(f"{path}: expected a feature vector for channel {channel}, "
                             f"got rank {arr.ndim}; run the extraction stages first")
        ids.append(entry.clip_id)
        rows.append(arr)
    return ids, np.stack(rows)


def _joint_matrix(manifest, k=7):
    columns = {ch: _channel_matrix(manifest, ch, k)[1] for ch in CHANNELS}
    ids = [e.clip_id for e in manifest.entries]
    joint = np.stack([
        fusion.build_joint_vector(columns["audio"][i], columns["lbptop"][i],
                                  columns["cnn"][i], columns["blstm"][i])
        for i in range(len(ids))
    ])
    return ids, joint


def _decisions_by_clip(paths):
    """Merge decision CSVs into clip_id -> {channel: label}."""
    merged = {}
    for path in paths:
        for clip_id, channel, label in fusion.read_decisions(path):
            merged.setdefault(clip_id, {})[channel] = label
    return merged


def _parse_informativeness(text):
    values = tuple(float(v) for v in text.split(","))
    if len(values) != len(CHANNELS):
        raise ValueError(f"--informativeness needs {len(CHANNELS)} comma-separated values")
    return values


def cmd_synth(args):
    config = synth.SynthConfig(
        n_clips=args.n_clips,
        informativeness=_parse_informativeness(args.informativeness),
        failed_channels=tuple(c for c in args.fail.split(",") if c) if args.fail else (),
        seed=args.seed,
        base_separation=args.base_separation,
        frames_min=args.frames_min,
        frames_max=args.frames_max,
    )
    manifest_path = synth.synth_generate(config, args.out)
    print(f"wrote {config.n_clips} clips under {args.out} (manifest: {manifest_path})")


def cmd_lbptop(args):
    params = LbpTopParams(radius_x=args.radius_x, radius_y=args.radius_y,
                          radius_t=args.radius_t, grid_rows=args.grid_rows,
                          grid_cols=args.grid_cols,
                          normalize_histograms=not args.no_normalize)
    volume = check_volume(read_tensor_array(args.infile))
    desc = lbp_top_descriptor(volume, params)
    write_tensor_array(args.out, desc)
    print(f"wrote descriptor of length {desc.size} to {args.out}")


def cmd_pca_fit(args):
    X = read_tensor_array(args.infile)
    model = features.pca_fit(X, args.q)
    features.save_pca(model, args.out)
    print(f"fit PCA {X.shape[1]} -> {args.q} on {X.shape[0]} samples; saved to {args.out}")


def cmd_pca_apply(args):
    model = features.load_pca(args.model)
    X = read_tensor_array(args.infile)
    write_tensor_array(args.out, features.pca_transform(model, X))
    print(f"wrote projected tensor to {args.out}")


def cmd_pool(args):
    scores = check_scores(read_tensor_array(args.infile))
    pooled = features.k_average_pool(scores, args.k)
    write_tensor_array(args.out, pooled)
    print(f"pooled {scores.shape[0]} frames into {args.k} bins -> {args.out}")


def cmd_train_svm(args):
    manifest = load_manifest(args.manifest)
    _, X = _channel_matrix(manifest, args.channel, args.k)
    model = learn.svm_train(X, manifest.labels(), C=args.c, epochs=args.epochs,
                            seed=args.seed)
    learn.save_svm(model, args.out, epochs=args.epochs, seed=args.seed)
    print(f"trained {args.channel} SVM on {X.shape[0]} clips; saved to {args.out}")


def cmd_predict_svm(args):
    manifest = load_manifest(args.manifest)
    ids, X = _channel_matrix(manifest, args.channel, args.k)
    model = learn.load_svm(args.model)
    labels = learn.svm_predict_batch(model, X)
    fusion.write_decisions(args.out, [(cid, args.channel, int(lab))
                                      for cid, lab in zip(ids, labels)])
    print(f"wrote {len(ids)} {args.channel} decisions to {args.out}")


def cmd_fuse_feat_train(args):
    manifest = load_manifest(args.manifest)
    _, joint = _joint_matrix(manifest, args.k)
    norm, svm = fusion.feature_fusion_train(joint, manifest.labels(), C=args.c,
                                            epochs=args.epochs, seed=args.seed)
    features.save_normalization(norm, args.out_norm)
    learn.save_svm(svm, args.out_svm, epochs=args.epochs, seed=args.seed)
    print(f"trained feature fusion on {joint.shape[0]} clips; "
          f"saved {args.out_norm} and {args.out_svm}")


def cmd_fuse_feat_predict(args):
    manifest = load_manifest(args.manifest)
    ids, joint = _joint_matrix(manifest, args.k)
    norm = features.load_normalization(args.norm)
    svm = learn.load_svm(args.svm)
    labels = learn.svm_predict_batch(svm, features.normalize_apply(norm, joint))
    fusion.write_decisions(args.out, [(cid, "joint", int(lab))
                                      for cid, lab in zip(ids, labels)])
    print(f"wrote {len(ids)} joint decisions to {args.out}")


def cmd_fuse_bn_fit(args):
    manifest = load_manifest(args.manifest)
    truths = {e.clip_id: e.label for e in manifest.entries}
    merged = _decisions_by_clip(args.decisions)
    channels = sorted({ch for obs in merged.values() for ch in obs},
                      key=lambda c: CHANNELS.index(c) if c in CHANNELS else len(CHANNELS))
    measurements = []
    for channel in channels:
        preds, ys = [], []
        for entry in manifest.entries:
            obs = merged.get(entry.clip_id, {})
            if channel not in obs:
                raise ValueError(f"clip {entry.clip_id!r} has no {channel} decision")
            if entry.label is None:
                raise ValueError(f"clip {entry.clip_id!r} is unlabeled; cannot fit CPTs")
            preds.append(obs[channel])
            ys.append(entry.label)
        if args.scalar:
            accuracy = float(np.mean(np.asarray(preds) == np.asarray(ys)))
            measurements.append(fusion.scalar_measurement(accuracy, channel))
        else:
            measurements.append(fusion.fit_measurement_cpt(preds, ys, alpha=args.alpha,
                                                           channel=channel))
    if args.prior == "empirical":
        prior = fusion.prior_from_labels([truths[e.clip_id] for e in manifest.entries])
    else:
        prior = fusion.uniform_prior()
    model = fusion.BnFusionModel(prior=prior, measurements=tuple(measurements))
    smoothing = {"mode": "scalar" if args.scalar else "confusion",
                 "alpha": args.alpha, "prior": args.prior}
    fusion.save_bn(model, args.out, smoothing=smoothing)
    print(f"fit BN fusion over channels {list(model.channels)}; saved to {args.out}")


def cmd_fuse_bn_infer(args):
    model = fusion.load_bn(args.model)
    merged = _decisions_by_clip(args.decisions)
    rows = []
    for clip_id in sorted(merged):
        label = fusion.bn_fusion_predict(model, merged[clip_id])
        rows.append((clip_id, "bn", label))
    fusion.write_decisions(args.out, rows)
    print(f"wrote {len(rows)} fused decisions to {args.out}")


def cmd_island_demo(args):
    X, y = synth.gaussian_blobs(args.n_per_class, seed=args.seed)
    baseline = learn.softmax_probe_train(
        X, y, learn.IslandLossParams(lambda1=args.lambda1, lam=0.0, alpha=args.alpha),
        epochs=args.epochs, seed=args.seed, lr=args.lr)
    island = learn.softmax_probe_train(
        X, y, learn.IslandLossParams(lambda1=args.lambda1, lam=args.lam, alpha=args.alpha),
        epochs=args.epochs, seed=args.seed, lr=args.lr)
    ratios = {}
    for name, probe in (("baseline", baseline), ("island", island)):
        feats = learn.probe_features(probe, X)
        ratios[name] = learn.clustering_ratio(feats, y, probe.centers)
        accuracy = float(np.mean(np.argmax(feats, axis=1) == y))
        print(f"{name:>9}: intra/inter ratio {ratios[name]:.4f}, "
              f"train accuracy {accuracy:.4f}")
    print(f"ratio shrink with island loss: {ratios['baseline'] - ratios['island']:+.4f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "baseline_loss", "island_loss"])
            for i, (lb, li) in enumerate(zip(baseline.trace, island.trace)):
                writer.writerow([i, repr(float(lb)), repr(float(li))])
        print(f"wrote loss traces to {args.out}")


def cmd_evaluate(args):
    manifest = load_manifest(args.manifest)
    rows = fusion.read_decisions(args.pred)
    channels = {ch for _, ch, _ in rows}
    if len(channels) != 1:
        raise ValueError(f"predictions must come from one channel, found {sorted(channels)}")
    by_clip = {cid: lab for cid, _, lab in rows}
    preds, truths = [], []
    for entry in manifest.entries:
        if entry.clip_id not in by_clip:
            raise ValueError(f"no prediction for clip {entry.clip_id!r}")
        if entry.label is None:
            raise ValueError(f"clip {entry.clip_id!r} is unlabeled")
        preds.append(by_clip[entry.clip_id])
        truths.append(entry.label)
    report = metrics.evaluate(preds, truths)
    print(metrics.format_report(report))
    if args.out:
        metrics.write_report_csv(report, args.out)
        print(f"wrote report to {args.out}")


def _add_common_training_flags(parser):
    parser.add_argument("--c", type=float, default=1.0, help="SVM regularization trade-off")
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--k", type=int, default=7, help="temporal pooling bins")


def build_parser():
    parser = argparse.ArgumentParser(prog="avfusion",
                                     description="Audiovisual emotion fusion pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-clips", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--informativeness", default="1,1,1,1",
                   help="per-channel values for audio,lbptop,cnn,blstm")
    p.add_argument("--fail", default="", help="comma-separated channels to fail")
    p.add_argument("--base-separation", type=float, default=6.0)
    p.add_argument("--frames-min", type=int, default=8)
    p.add_argument("--frames-max", type=int, default=24)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("lbptop", help="compute an LBP-TOP descriptor")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-rows", type=int, default=4)
    p.add_argument("--grid-cols", type=int, default=4)
    p.add_argument("--radius-x", type=int, default=1)
    p.add_argument("--radius-y", type=int, default=1)
    p.add_argument("--radius-t", type=int, default=1)
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_lbptop)

    p = sub.add_parser("pca", help="fit or apply a PCA model")
    pca_sub = p.add_subparsers(dest="pca_command", required=True)
    pf = pca_sub.add_parser("fit")
    pf.add_argument("--in", dest="infile", required=True, help="n×d FVT1 matrix")
    pf.add_argument("--q", type=int, required=True)
    pf.add_argument("--out", required=True, help="model JSON path")
    pf.set_defaults(func=cmd_pca_fit)
    pa = pca_sub.add_parser("apply")
    pa.add_argument("--model", required=True)
    pa.add_argument("--in", dest="infile", required=True)
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=cmd_pca_apply)

    p = sub.add_parser("pool", help="k-average pool a score matrix")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=7)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("train-svm", help="train a per-channel SVM")
    p.add_argument("--manifest", required=True)
    p.add_argument("--channel", required=True, choices=CHANNELS)
    p.add_argument("--out", required=True)
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_train_svm)

    p = sub.add_parser("predict-svm", help="per-channel SVM decisions")
    p.add_argument("--manifest", required=True)
    p.add_argument("--channel", required=True, choices=CHANNELS)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=7)
    p.set_defaults(func=cmd_predict_svm)

    p = sub.add_parser("fuse-feat", help="feature-level fusion")
    feat_sub = p.add_subparsers(dest="feat_command", required=True)
    ft = feat_sub.add_parser("train")
    ft.add_argument("--manifest", required=True)
    ft.add_argument("--out-norm", required=True)
    ft.add_argument("--out-svm", required=True)
    _add_common_training_flags(ft)
    ft.set_defaults(func=cmd_fuse_feat_train)
    fp = feat_sub.add_parser("predict")
    fp.add_argument("--manifest", required=True)
    fp.add_argument("--norm", required=True)
    fp.add_argument("--svm", required=True)
    fp.add_argument("--out", required=True)
    fp.add_argument("--k", type=int, default=7)
    fp.set_defaults(func=cmd_fuse_feat_predict)

    p = sub.add_parser("fuse-bn", help="Bayesian-network model-level fusion")
    bn_sub = p.add_subparsers(dest="bn_command", required=True)
    bf = bn_sub.add_parser("fit")
    bf.add_argument("--manifest", required=True)
    bf.add_argument("--decisions", nargs="+", required=True)
    bf.add_argument("--alpha", type=float, default=1.0, help="Laplace smoothing")
    bf.add_argument("--scalar", action="store_true",
                    help="use scalar accuracies instead of confusion CPTs")
    bf.add_argument("--prior", choices=("uniform", "empirical"), default="uniform")
    bf.add_argument("--out", required=True)
    bf.set_defaults(func=cmd_fuse_bn_fit)
    bi = bn_sub.add_parser("infer")
    bi.add_argument("--model", required=True)
    bi.add_argument("--decisions", nargs="+", required=True)
    bi.add_argument("--out", required=True)
    bi.set_defaults(func=cmd_fuse_bn_infer)

    p = sub.add_parser("island-demo", help="island loss vs plain softmax on toy blobs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lam", type=float, default=0.01)
    p.add_argument("--lambda1", type=float, default=10.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=800)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--n-per-class", type=int, default=40)
    p.add_argument("--out", default=None, help="optional loss-trace CSV")
    p.set_defaults(func=cmd_island_demo)

    p = sub.add_parser("evaluate", help="score decisions against manifest labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="optional report CSV")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
