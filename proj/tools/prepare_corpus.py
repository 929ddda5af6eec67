#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Builds data/shakespeare.txt from the public-domain Gutenberg plays shipped in
the `shakespeare` sdist on PyPI (Open Shakespeare, MIT-licensed packaging).

Usage: tools/prepare_corpus.py [--src DIR] [--out data/shakespeare.txt]

Without --src the sdist is fetched with `pip download`.
"""
import argparse
import pathlib
import re
import subprocess
import tarfile
import tempfile

PLAYS = [
    "coriolanus", "richard_iii", "romeo_and_juliet", "richard_ii",
    "henry_vi_part_3", "winters_tale", "measure_for_measure",
    "taming_of_the_shrew", "tempest", "henry_vi_part_2",
]
TARGET_CHARS = 1_115_394


def clean(text: str) -> str:
    start = re.search(r"^ACT I\b", text, flags=re.M)
    if start:
        text = text[start.start():]
    lines = [ln.strip() for ln in text.splitlines()]
    out, blank = [], False
    for ln in lines:
        if not ln:
            if not blank and out:
                out.append("")
            blank = True
            continue
        blank = False
        out.append(ln.encode("ascii", "ignore").decode("ascii"))
    return "\n".join(out).strip() + "\n\n"


def fetch(tmp: pathlib.Path) -> pathlib.Path:
    subprocess.run(["pip", "download", "--no-deps", "--no-binary", ":all:",
                    "-d", str(tmp), "shakespeare==0.6"], check=True)
    with tarfile.open(next(tmp.glob("shakespeare-*.tar.gz"))) as tf:
        tf.extractall(tmp)
    return tmp / "shakespeare-0.6" / "shksprdata" / "texts"


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--src", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/shakespeare.txt"))
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        src = args.src or fetch(pathlib.Path(tmp))
        corpus = ""
        for play in PLAYS:
            corpus += clean((src / f"{play}_gut.txt").read_text(encoding="latin-1"))
            if len(corpus) >= TARGET_CHARS:
                break
    corpus = corpus[:TARGET_CHARS]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(corpus, encoding="ascii")
    print(f"wrote {len(corpus)} chars, {len(set(corpus))} distinct, to {args.out}")


if __name__ == "__main__":
    main()
