"""Materialise MovieLens-100k ``u.data`` without network access to grouplens.org.

The ``pytorch-widedeep`` wheel ships the full 100k rating table as a parquet
file.  This script downloads that wheel with pip (no install), reads the
table and writes it back out in the original tab-separated ``u.data`` layout.

    python scripts/fetch_movielens.py data/ml-100k [path/to/pytorch_widedeep.whl]

The data is subject to the GroupLens usage licence; it is not redistributed
with this repository.
"""

import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli"


def read_table(wheel):
    import pandas as pd

    with zipfile.ZipFile(wheel) as zf:
        return pd.read_parquet(io.BytesIO(zf.read(MEMBER)))


def main(dest="data/ml-100k", wheel=None):
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    if wheel is not None:
        df = read_table(wheel)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            subprocess.run(
                [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp,
                 "pytorch-widedeep==1.7.0"],
                check=True,
            )
            df = read_table(next(Path(tmp).glob("pytorch_widedeep-*.whl")))
    cols = ["user_id", "movie_id", "rating", "timestamp"]
    lines = ("\t".join(str(int(v)) for v in row) for row in df[cols].itertuples(index=False))
    out = dest / "u.data"
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(df)} ratings to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
