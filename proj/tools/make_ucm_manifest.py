#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Build a manifest for the UC Merced land-use dataset.

Expects the usual UCMerced_LandUse/Images/<class>/<image>.tif layout. Image
refs are written relative to --root; point XFER_DATA_ROOT (or --data-root)
at the same directory when running.
"""

import argparse
from pathlib import Path


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--root", required=True, help="directory that holds Images/")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    root = Path(args.root)
    classes = sorted(p.name for p in (root / "Images").iterdir() if p.is_dir())
    lines = [f"#dataset_id=ucm;label_mode=single;classes={','.join(classes)};image_size=256;resolution_m=0.3-0.3"]
    for i, c in enumerate(classes):
        for img in sorted((root / "Images" / c).glob("*.tif")):
            lines.append(f"{img.relative_to(root).as_posix()}\t{i}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"{len(lines) - 1} images, {len(classes)} classes -> {args.out}")


if __name__ == "__main__":
    main()
