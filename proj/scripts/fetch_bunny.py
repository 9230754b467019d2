#!/usr/bin/env python3
"""Download the Stanford bunny and write it as an x,y,z CSV cloud in millimeters."""
import argparse
import io
import tarfile
import urllib.request

URL = "http://graphics.stanford.edu/pub/3Dscanrep/bunny.tar.gz"
MEMBER = "bunny/reconstruction/bun_zipper_res2.ply"


def ply_vertices(text):
    lines = text.splitlines()
    count = 0
    body = 0
    for i, line in enumerate(lines):
        if line.startswith("element vertex"):
            count = int(line.split()[2])
        if line.strip() == "end_header":
            body = i + 1
            break
    return [tuple(float(v) for v in lines[body + k].split()[:3]) for k in range(count)]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", help="CSV path to write")
    parser.add_argument("--member", default=MEMBER, help="PLY file inside the archive")
    parser.add_argument("--scale", type=float, default=1000.0, help="unit conversion (archive is in meters)")
    args = parser.parse_args()

    with urllib.request.urlopen(URL) as response:
        archive = tarfile.open(fileobj=io.BytesIO(response.read()), mode="r:gz")
    text = archive.extractfile(args.member).read().decode("ascii")
    with open(args.output, "w") as out:
        out.write("x,y,z\n")
        for x, y, z in ply_vertices(text):
            out.write(f"{x * args.scale:.6f},{y * args.scale:.6f},{z * args.scale:.6f}\n")


if __name__ == "__main__":
    main()
