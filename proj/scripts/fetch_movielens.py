#!/usr/bin/env python3
"""Fetch MovieLens-100K and write it as a tab-separated event log.

The ratings ship inside the pytorch-widedeep wheel, which is reachable through
an ordinary pip index. Output columns:

    user_id  item_id  category_id  timestamp  rating

category_id is the movie's genre combination (e.g. "Action|Thriller"), so
every movie maps to exactly one category.
"""
import argparse
import glob
import io
import os
import subprocess
import sys
import tempfile
import zipfile

import pandas as pd

GENRES = ["unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
          "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
          "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western"]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "ml-100k.tsv"))
    ap.add_argument("--wheel", help="use an already downloaded pytorch_widedeep wheel")
    args = ap.parse_args()

    wheel = args.wheel
    tmp = None
    if wheel is None:
        tmp = tempfile.mkdtemp()
        subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                               "-d", tmp, "pytorch-widedeep==1.7.0"])
        wheel = glob.glob(os.path.join(tmp, "pytorch_widedeep*.whl"))[0]

    z = zipfile.ZipFile(wheel)
    prefix = "pytorch_widedeep/datasets/data/MovieLens100k_"
    ratings = pd.read_parquet(io.BytesIO(z.read(prefix + "data.parquet.brotli")))
    items = pd.read_parquet(io.BytesIO(z.read(prefix + "items.parquet.brotli")))

    def genre_key(row):
        names = [g for g in GENRES if row[g] == 1]
        return "|".join(names) if names else "unknown"

    items["category_id"] = items.apply(genre_key, axis=1)
    df = ratings.merge(items[["movie_id", "category_id"]], on="movie_id", how="left")
    df = df.rename(columns={"movie_id": "item_id"})
    df = df.sort_values(["user_id", "timestamp", "item_id"], kind="mergesort")
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    df[["user_id", "item_id", "category_id", "timestamp", "rating"]].to_csv(
        args.out, sep="\t", index=False)
    print(f"wrote {len(df)} rows, {df.user_id.nunique()} users, "
          f"{df.item_id.nunique()} items, {df.category_id.nunique()} categories -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
