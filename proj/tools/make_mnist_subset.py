#!/usr/bin/env python3
"""Write the first N images of the MNIST sample bundled in the mlxtend wheel
as an IDX3 unsigned-byte file.

    pip download --no-deps -d /tmp/wheels mlxtend
    python3 tools/make_mnist_subset.py /tmp/wheels/mlxtend-*.whl data/mnist_subset.idx3 --count 100
"""
import argparse
import gzip
import struct
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("wheel")
    ap.add_argument("out")
    ap.add_argument("--count", type=int, default=100)
    args = ap.parse_args()

    text = gzip.decompress(zipfile.ZipFile(args.wheel).read(MEMBER)).decode()
    rows = text.splitlines()[: args.count]
    with open(args.out, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for line in rows:
            # 784 pixel values followed by the label
            pixels = [int(v) for v in line.split(",")[:784]]
            f.write(bytes(pixels))


if __name__ == "__main__":
    main()
