#!/usr/bin/env python3
"""Fetch the UCI regression datasets used by the acceptance suite into data/.

Boston comes from the copy bundled in the mlxtend wheel (13 features plus
MEDV, full precision, no header); Wine Quality (red) from the UCI archive.
Source bytes are checked against a pinned SHA-256 where one is known.

    python3 scripts/fetch_uci.py [--out data] [--mlxtend-wheel PATH]
"""

import argparse
import glob
import hashlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

BOSTON_MEMBER = "mlxtend/data/data/boston_housing.csv"
BOSTON_SHA256 = "8594f084258ead302f20a7479463f7a7584d33fe00042d442a7101530c8b46de"
BOSTON_COLUMNS = ["crim", "zn", "indus", "chas", "nox", "rm", "age", "dis", "rad",
                  "tax", "ptratio", "b", "lstat", "medv"]

WINE_URL = ("https://archive.ics.uci.edu/ml/machine-learning-databases/"
            "wine-quality/winequality-red.csv")
# Not yet pinned: the archive was unreachable when this script was written.
WINE_SHA256: str | None = None


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def check(name: str, data: bytes, expected: str | None, strict: bool) -> None:
    got = sha256(data)
    if expected is None:
        print(f"{name}: sha256 {got} (no pinned value to compare)", file=sys.stderr)
        return
    if got == expected:
        return
    msg = f"{name}: sha256 {got} does not match pinned {expected}"
    if strict:
        sys.exit(msg)
    print("warning: " + msg, file=sys.stderr)


def mlxtend_wheel(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    tmp = Path(tempfile.mkdtemp())
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                    "mlxtend==0.24.0", "-d", str(tmp)], check=True)
    return Path(glob.glob(str(tmp / "mlxtend-*.whl"))[0])


def fetch_boston(out: Path, wheel: str | None, strict: bool) -> None:
    raw = zipfile.ZipFile(mlxtend_wheel(wheel)).read(BOSTON_MEMBER)
    check("boston", raw, BOSTON_SHA256, strict)
    rows = [line.rstrip(",") for line in raw.decode().splitlines() if line.strip()]
    if len(rows) != 506 or any(len(r.split(",")) != 14 for r in rows):
        sys.exit("boston: expected 506 rows of 14 values")
    text = ",".join(BOSTON_COLUMNS) + "\n" + "\n".join(rows) + "\n"
    (out / "boston.csv").write_text(text)
    print(f"wrote {out / 'boston.csv'} (506 rows)")


def fetch_wine(out: Path, strict: bool) -> None:
    try:
        raw = urllib.request.urlopen(WINE_URL, timeout=30).read()
    except OSError as e:
        print(f"wine: download failed ({e}); criterion 12 will report the file as missing",
              file=sys.stderr)
        return
    check("wine", raw, WINE_SHA256, strict)
    # The UCI file is ';'-separated with quoted headers.
    lines = raw.decode().replace('"', "").splitlines()
    header = [h.strip().replace(" ", "_") for h in lines[0].split(";")]
    body = [l.replace(";", ",") for l in lines[1:] if l.strip()]
    (out / "winequality-red.csv").write_text(",".join(header) + "\n" + "\n".join(body) + "\n")
    print(f"wrote {out / 'winequality-red.csv'} ({len(body)} rows)")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="data")
    p.add_argument("--mlxtend-wheel", help="use a local mlxtend wheel instead of pip download")
    p.add_argument("--no-verify", action="store_true", help="warn on checksum mismatch")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fetch_boston(out, args.mlxtend_wheel, not args.no_verify)
    fetch_wine(out, not args.no_verify)


if __name__ == "__main__":
    main()
