"""Rebuild LIBSVM-format copies of the benchmark datasets from offline sources.

The LIBSVM site is not always reachable, so the files under ``data/`` are
regenerated from copies bundled inside Python distributions:

* breast-cancer  <- MASS ``biopsy`` (pydataset sdist), rows with NA dropped;
                    feature 1 is the sample code number, as in LIBSVM
* heart          <- KEEL ``heart`` (keel-ds wheel); KEEL drops the decimal
                    point of ``oldpeak``, undone here (divide by 10)
* ionosphere     <- Orange ``ionosphere.tab`` (orange3 wheel), full precision
* sonar          <- KEEL ``sonar`` (values rounded to 3 decimals by KEEL)

Only the ``_scale`` variants are written (``svm-scale -l -1 -u 1``, printed
with ``%g`` like the LIBSVM originals).

Usage::

    pip download --no-deps keel-ds orange3 pydataset -d /tmp/src
    python tools/make_datasets.py /tmp/src data/
"""
import argparse
import csv
import glob
import io
import os
import tarfile
import zipfile

import numpy as np

from drscreen.libsvm import scale_features, write_libsvm


def _member(archive_glob, name):
    path = sorted(glob.glob(archive_glob))[0]
    if path.endswith(".whl"):
        with zipfile.ZipFile(path) as z:
            return z.read(name).decode("utf-8")
    with tarfile.open(path) as t:
        inner = t.extractfile(t.getmember(name)).read()
    return inner


def _keel(src, name):
    text = _member(os.path.join(src, "keel_ds-*.whl"), f"keel_ds/data/balanced/raw/{name}.dat")
    rows = [ln.replace(" ", "").split(",") for ln in text.splitlines()
            if ln.strip() and not ln.startswith("@")]
    return [r[:-1] for r in rows], [r[-1] for r in rows]


def breast_cancer(src):
    outer = _member(os.path.join(src, "pydataset-*.tar.gz"), "pydataset-0.2.0/pydataset/resources.tar.gz")
    with tarfile.open(fileobj=io.BytesIO(outer)) as t:
        text = t.extractfile("resources/rdata/csv/MASS/biopsy.csv").read().decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))[1:]
    X, y = [], []
    for r in rows:
        feats = r[1:11]
        if "NA" in feats:
            continue
        X.append([float(v) for v in feats])
        y.append(4.0 if r[11] == "malignant" else 2.0)
    return np.array(X), np.array(y)


def heart(src):
    feats, labels = _keel(src, "heart")
    X = np.array(feats, dtype=float)
    X[:, 9] /= 10.0
    y = np.where(np.array(labels) == "2", 1.0, -1.0)
    return X, y


def ionosphere(src):
    text = _member(os.path.join(src, "orange3-*.whl"), "Orange/tests/datasets/ionosphere.tab")
    rows = [ln.split("\t") for ln in text.splitlines()[3:] if ln.strip()]
    X = np.array([[float(v) for v in r[:-1]] for r in rows])
    y = np.where(np.array([r[-1].strip() for r in rows]) == "g", 1.0, -1.0)
    return X, y


def sonar(src):
    feats, labels = _keel(src, "sonar")
    X = np.array(feats, dtype=float)
    y = np.where(np.array(labels) == "R", 1.0, -1.0)
    return X, y


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("sources", help="directory holding the downloaded distributions")
    ap.add_argument("out", help="output directory")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    X, y = breast_cancer(args.sources)
    write_libsvm(os.path.join(args.out, "breast-cancer_scale"), scale_features(X), y, fmt="%g")
    X, y = heart(args.sources)
    write_libsvm(os.path.join(args.out, "heart_scale"), scale_features(X), y, fmt="%g")
    X, y = ionosphere(args.sources)
    write_libsvm(os.path.join(args.out, "ionosphere_scale"), scale_features(X), y, fmt="%g")
    X, y = sonar(args.sources)
    write_libsvm(os.path.join(args.out, "sonar_scale"), scale_features(X), y, fmt="%g")


if __name__ == "__main__":
    main()
