"""fmixcert command line: augment, train, certify, heatmap, genbench, metrics, synth.

Exit codes: 0 ok, 1 usage, 2 I/O, 3 data format.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import augment, benchgen, certify, datasets, spectral, train
from .errors import EXIT_FORMAT, EXIT_IO, EXIT_USAGE, FormatError
from .imageio import read_imgf, write_imgf, write_ppm
from .model import MlpClassifier, load_checkpoint, save_checkpoint
from .numerics import Rng

_INIT_STREAM = 1
_LIMIT_STREAM = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_dataset(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("dataset")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="IMGF1 directory with index.csv, or an index CSV")
    src.add_argument("--cifar", help="CIFAR binary batch file")
    src.add_argument("--synth", type=int, metavar="N", help="N synthetic shapes per class")
    g.add_argument("--synth-size", type=int, default=32)
    g.add_argument("--synth-classes", type=int, default=4)
    g.add_argument("--synth-seed", type=int, default=0)
    g.add_argument("--num-classes", type=int, default=None)


def _add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def _add_cert(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("certification")
    g.add_argument("--sigma", type=float, default=0.25)
    g.add_argument("--n0", type=int, default=100)
    g.add_argument("--n", type=int, default=100_000)
    g.add_argument("--alpha", type=float, default=0.001)
    g.add_argument("--batch-size", type=int, default=1024)
    g.add_argument("--limit", type=int, default=None, help="certify a seeded subsample of N images")


def load_dataset(args) -> datasets.LabeledDataset:
    if args.data is not None:
        if not Path(args.data).exists():
            raise UsageError(f"dataset path {args.data} does not exist")
        return datasets.load_imgf_dir(args.data, args.num_classes)
    if args.cifar is not None:
        return datasets.load_cifar_binary(args.cifar, num_classes=args.num_classes or 10)
    return datasets.synth_shapes(args.synth, args.synth_size, args.synth_classes,
                                 Rng(args.synth_seed))


def _limited(ds: datasets.LabeledDataset, limit, seed: int) -> np.ndarray:
    """Positions to evaluate: all, or a sorted seeded subsample."""
    if limit is None or limit >= len(ds):
        return np.arange(len(ds))
    if limit < 1:
        raise UsageError("--limit must be >= 1")
    return np.sort(Rng(seed, _LIMIT_STREAM).permutation(len(ds))[:limit])


def _cert_config(args) -> certify.CertConfig:
    return certify.CertConfig(args.sigma, args.n0, args.n, args.alpha, args.batch_size)


# ------------------------------------------------------------------ commands


def cmd_augment(args) -> int:
    src = Path(args.input)
    if not src.is_dir():
        raise UsageError(f"input directory {src} does not exist")
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    if (src / "index.csv").exists():
        ds = datasets.load_imgf_dir(src)
        items = list(zip(ds.ids, ds.images))
    else:
        items = [(p.stem, read_imgf(p)) for p in sorted(src.glob("*.imgf"))]
    cfg = augment.FourierMixConfig(
        k=args.chains, dirichlet_alpha=args.dirichlet_alpha, phase_sigma=args.phase_sigma,
        **({"rotation": 0.0, "translate": 0.0, "scale": (1.0, 1.0), "shear": 0.0}
           if args.no_affine else {}))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    root = Rng(args.seed)
    rows = []
    for pos, (ident, img) in enumerate(items):
        for c in range(args.count):
            aug = augment.fouriermix(img, cfg, root.derive(pos).derive(c))
            name = f"{ident}_aug{c}.imgf"
            write_imgf(out / name, aug)
            if args.ppm:
                write_ppm(out / f"{ident}_aug{c}.ppm", aug)
            rows.append([ident, c, name])
    with open(out / "manifest.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["source", "copy", "path"])
        w.writerows(rows)
    print(f"wrote {len(rows)} images to {out}")
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(args)
    dim = int(np.prod(ds.shape))
    model = MlpClassifier.init(dim, ds.num_classes, args.hidden, Rng(args.seed, _INIT_STREAM))
    tcfg = train.TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                             momentum=args.momentum, seed=args.seed, mode=args.mode,
                             threads=args.threads)
    hcfg = train.HcrConfig(k=args.k, s=args.s, lam=args.lam, eta=args.eta, sigma=args.sigma)

    def report(row):
        if not args.quiet:
            print(f"epoch {row.epoch}: ce={row.mean_ce:.6g} hcr={row.mean_hcr:.6g} "
                  f"total={row.total:.6g}", file=sys.stderr)

    model, log = train.train(model, ds.images, ds.labels, tcfg, hcfg, progress=report)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    train.write_loss_log(args.loss_csv or out.with_suffix(".loss.csv"), log)
    return 0


def cmd_certify(args) -> int:
    model = load_checkpoint(args.checkpoint)
    ds = load_dataset(args)
    pos = _limited(ds, args.limit, args.seed)
    cfg = _cert_config(args)
    results = certify.certify_dataset(model, ds.images[pos], cfg, Rng(args.seed),
                                      threads=args.threads, indices=pos)
    labels = ds.labels[pos]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    certify.write_cert_csv(out, pos, labels, results)
    print(f"ACR={certify.acr_from_results(results, labels):.6g}")
    return 0


def cmd_heatmap(args) -> int:
    model = load_checkpoint(args.checkpoint)
    ds = load_dataset(args)
    pos = _limited(ds, args.limit, args.seed)
    hm = spectral.sensitivity_heatmap(model, ds.images[pos], ds.labels[pos], args.eps,
                                      _cert_config(args), Rng(args.seed), threads=args.threads,
                                      dataset_id=str(args.data or args.cifar or "synth"))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    hm.write_csv(out.with_suffix(".csv"))
    hm.write_ppm(out.with_suffix(".ppm"))
    print(f"clean ACR={hm.clean_acr:.6g} heatmap min={hm.grid.min():.6g} max={hm.grid.max():.6g}")
    return 0


def cmd_genbench(args) -> int:
    ds = load_dataset(args)
    pos = _limited(ds, args.limit, args.seed)
    specs = benchgen.default_grid(args.eps, args.alphas, args.fcs, args.b,
                                  args.clip_lo, args.clip_hi)
    ids = [ds.ids[i] for i in pos]
    out = Path(args.out)
    entries = benchgen.generate_f_suite(ds.images[pos], ids, specs, out, Rng(args.seed),
                                        threads=args.threads, ppm=args.ppm)
    # one labeled index per cell so each corrupted set loads as a dataset
    n_img = len(pos)
    for ci, spec in enumerate(specs):
        cell = entries[ci * n_img:(ci + 1) * n_img]
        datasets.write_index(out / f"index_{spec.tag}.csv", ids, ds.labels[pos],
                             [e.path for e in cell])
    print(f"wrote {len(specs)} cells x {n_img} images to {out}")
    return 0


def _band_of(clean: datasets.LabeledDataset, corrupted_path: str) -> spectral.Band:
    bad = datasets.load_imgf_dir(corrupted_path)
    where = {ident: i for i, ident in enumerate(clean.ids)}
    missing = [i for i in bad.ids if i not in where]
    if missing:
        raise FormatError(f"{corrupted_path}: ids {missing[:3]} not in the clean set")
    ref = clean.images[[where[i] for i in bad.ids]]
    return spectral.classify_band(spectral.corruption_spectrum(ref, bad.images))


def cmd_metrics(args) -> int:
    names, values = [], []
    for path in args.csv:
        rows = certify.read_cert_csv(path)
        names.append(Path(path).stem)
        values.append(certify.acr_from_csv_rows(rows))
    for name, v in zip(names, values):
        print(f"{name},ACR={v:.6g}")
    if args.corrupted:
        if args.clean is None or len(args.corrupted) != len(args.csv):
            raise UsageError("--corrupted needs --clean and one entry per certification CSV")
        clean = datasets.load_imgf_dir(args.clean)
        groups: dict[spectral.Band, list[float]] = {}
        for path, v in zip(args.corrupted, values):
            groups.setdefault(_band_of(clean, path), []).append(v)
        for band in spectral.Band:
            if band in groups:
                print(f"{band.value}: mACR={certify.macr(groups[band]):.6g} "
                      f"({len(groups[band])} corruptions)")
    print(f"mACR={certify.macr(values):.6g}")
    return 0


def cmd_synth(args) -> int:
    ds = datasets.synth_shapes(args.per_class, args.size, args.classes, Rng(args.seed))
    datasets.save_imgf_dir(ds, args.out)
    print(f"wrote {len(ds)} images to {args.out}")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fmixcert", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("augment", help="write FourierMix copies of every input image")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=3)
    p.add_argument("--dirichlet-alpha", type=float, default=1.0)
    p.add_argument("--phase-sigma", type=float, default=5.0)
    p.add_argument("--no-affine", action="store_true")
    p.add_argument("--ppm", action="store_true")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train an MLP classifier")
    _add_dataset(p)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-csv", default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=train.MODES, default="hcr")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--lam", type=float, default=40.0)
    p.add_argument("--eta", type=float, default=10.0)
    p.add_argument("--sigma", type=float, default=0.25)
    p.add_argument("--quiet", action="store_true")
    _add_threads(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("certify", help="certify a dataset with the smoothed classifier")
    p.add_argument("--checkpoint", required=True)
    _add_dataset(p)
    _add_cert(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_threads(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("heatmap", help="Fourier-basis sensitivity heatmap")
    p.add_argument("--checkpoint", required=True)
    _add_dataset(p)
    _add_cert(p)
    p.add_argument("--eps", type=float, default=4.0)
    p.add_argument("--out", required=True, help="output prefix (.csv and .ppm are added)")
    p.add_argument("--seed", type=int, default=0)
    _add_threads(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("genbench", help="generate the power-law spectral corruption suite")
    _add_dataset(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eps", type=_floats, default=list(benchgen.DEFAULT_EPS))
    p.add_argument("--alphas", type=_floats, default=list(benchgen.DEFAULT_ALPHAS))
    p.add_argument("--fcs", type=_ints, default=list(benchgen.DEFAULT_FCS))
    p.add_argument("--b", type=float, default=0.2)
    p.add_argument("--clip-lo", type=float, default=25.0)
    p.add_argument("--clip-hi", type=float, default=75.0)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--ppm", action="store_true")
    _add_threads(p)
    p.set_defaults(func=cmd_genbench)

    p = sub.add_parser("metrics", help="per-corruption ACR and mACR from certification CSVs")
    p.add_argument("csv", nargs="+")
    p.add_argument("--clean", default=None, help="clean IMGF1 set for band grouping")
    p.add_argument("--corrupted", nargs="+", default=None,
                   help="corrupted sets (dirs or index CSVs), one per certification CSV")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="export a synthetic shapes dataset as IMGF1")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("fmixcert: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"fmixcert: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"fmixcert: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError) as exc:
        print(f"fmixcert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
