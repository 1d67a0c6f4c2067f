#!/usr/bin/env python3
"""Materialize the 5000-sample MNIST subset as standard IDX files.

The subset (500 images per digit, drawn from the MNIST training set) ships
inside the mlxtend wheel as a gzipped CSV. This script downloads the wheel
with pip, decodes the CSV, and writes

    data/mnist/mnist5k-images-idx3-ubyte
    data/mnist/mnist5k-labels-idx1-ubyte

in the big-endian IDX layout used by the original distribution.
"""

import argparse
import gzip
import pathlib
import struct
import subprocess
import sys
import tempfile
import zipfile


def fetch_csv(workdir: pathlib.Path) -> list[str]:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "mlxtend==0.24.0",
         "-d", str(workdir)],
        check=True,
    )
    wheel = next(workdir.glob("mlxtend-*.whl"))
    with zipfile.ZipFile(wheel) as zf:
        raw = zf.read("mlxtend/data/data/mnist_5k.csv.gz")
    return gzip.decompress(raw).decode().splitlines()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "mnist"))
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        rows = fetch_csv(pathlib.Path(tmp))

    pixels = bytearray()
    labels = bytearray()
    for row in rows:
        fields = row.split(",")
        if len(fields) != 785:
            raise SystemExit(f"unexpected row width {len(fields)}")
        pixels.extend(int(float(v)) for v in fields[:784])
        labels.append(int(float(fields[784])))

    n = len(labels)
    (out / "mnist5k-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, n, 28, 28) + bytes(pixels))
    (out / "mnist5k-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, n) + bytes(labels))
    print(f"wrote {n} samples to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
