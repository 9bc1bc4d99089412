#!/usr/bin/env python3
"""Download the malaria gene/substring data into data/malaria/.

Pass direct file URLs (or local paths) for the published var-gene matrix
and its class labels:

    python3 scripts/fetch_malaria.py --matrix URL --labels URL \\
        [--matrix-sha256 HEX] [--labels-sha256 HEX] [--matrix-format edges]

Produces ``matrix.<csv|coord|edges>``, ``labels.csv`` ("identifier,class")
and ``MANIFEST.json`` with sources and checksums. Labels given as one class
per line are paired with row identifiers 1..n, so the matrix must then use
1-based integer row identifiers (or none). Nothing is repaired: a checksum
mismatch or a file the loaders reject is an error.
"""
import argparse
import json
import shutil
import sys
import tempfile
import urllib.request
from pathlib import Path

from reflexsim import dataio

SUFFIX = {"csv": ".csv", "coord": ".coord", "edges": ".edges"}


def fetch(src: str, dest: Path) -> None:
    if Path(src).exists():
        shutil.copyfile(src, dest)
        return
    with urllib.request.urlopen(src, timeout=60) as resp, open(dest, "wb") as fh:
        shutil.copyfileobj(resp, fh)


def verify(path: Path, expected: str | None) -> str:
    digest = dataio.sha256sum(path)
    if expected and digest != expected.lower():
        raise SystemExit(f"checksum mismatch for {path.name}: {digest} != {expected}")
    return digest


def normalize_labels(raw: Path, out: Path) -> None:
    lines = [ln.strip() for ln in raw.read_text().splitlines() if ln.strip()]
    if lines and all("," not in ln and "\t" not in ln for ln in lines):
        out.write_text("".join(f"{i},{cls}\n" for i, cls in enumerate(lines, start=1)))
    else:
        out.write_text("\n".join(ln.replace("\t", ",") for ln in lines) + "\n")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--matrix", required=True, help="URL or path of the gene x substring matrix")
    p.add_argument("--labels", required=True, help="URL or path of the per-gene class labels")
    p.add_argument("--matrix-format", choices=sorted(SUFFIX), default=None,
                   help="default: from the source suffix")
    p.add_argument("--matrix-sha256")
    p.add_argument("--labels-sha256")
    p.add_argument("--dest", default=str(Path(__file__).resolve().parents[1] / "data" / "malaria"))
    args = p.parse_args(argv)

    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    fmt = args.matrix_format or dataio.MatrixFormat.from_path(args.matrix).value
    with tempfile.TemporaryDirectory() as tmp:
        raw_m, raw_l = Path(tmp) / "matrix", Path(tmp) / "labels"
        fetch(args.matrix, raw_m)
        fetch(args.labels, raw_l)
        sums = {"matrix": verify(raw_m, args.matrix_sha256), "labels": verify(raw_l, args.labels_sha256)}
        matrix_path = dest / f"matrix{SUFFIX[fmt]}"
        shutil.copyfile(raw_m, matrix_path)
        normalize_labels(raw_l, dest / "labels.csv")

    try:
        ds = dataio.load_dataset(matrix_path, dest / "labels.csv", format=fmt)
    except dataio.DataFormatError as exc:
        raise SystemExit(f"fetched files do not load: {exc}") from None
    manifest = {"matrix_source": args.matrix, "labels_source": args.labels, "format": fmt,
                "sha256": sums, "shape": list(ds.matrix.shape), "density": ds.density,
                "classes": ds.class_names}
    (dest / "MANIFEST.json").write_text(json.dumps(manifest, indent=1) + "\n")
    print(f"{matrix_path}: {ds.matrix.shape[0]}x{ds.matrix.shape[1]}, density {ds.density:.4f}, "
          f"{len(ds.class_names)} classes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
