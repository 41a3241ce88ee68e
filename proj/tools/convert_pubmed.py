#!/usr/bin/env python3
"""Convert the Planetoid Pubmed distribution into the engine's dataset layout.

Expects the eight pickled Planetoid files in --in:
    ind.pubmed.x  ind.pubmed.y  ind.pubmed.tx  ind.pubmed.ty
    ind.pubmed.allx  ind.pubmed.ally  ind.pubmed.graph  ind.pubmed.test.index

Writes --out/dataset.json plus one block of edges/features/labels/splits
files, loadable by `genie train --config ... ` with "dataset" pointing at
the manifest. Split convention matches the usual semi-supervised setup:
the first |y| nodes train, the next 500 validate, test.index tests.
"""

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_pickle(path: Path):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")  # python2-era pickles


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--in", dest="src", default="raw/pubmed", help="directory with ind.pubmed.*")
    ap.add_argument("--out", dest="out", default="data/pubmed", help="output dataset directory")
    args = ap.parse_args()

    src = Path(args.src)
    names = ["x", "y", "tx", "ty", "allx", "ally", "graph"]
    missing = [n for n in names + ["test.index"] if not (src / f"ind.pubmed.{n}").exists()]
    if missing:
        sys.exit(f"missing {', '.join('ind.pubmed.' + n for n in missing)} under {src}")

    x, y, tx, ty, allx, ally, graph = (load_pickle(src / f"ind.pubmed.{n}") for n in names)
    test_idx = np.loadtxt(src / "ind.pubmed.test.index", dtype=int)
    test_sorted = np.sort(test_idx)

    # Stack the labeled+unlabeled block with the test block, then undo the
    # permutation the distribution applies to the test rows.
    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    features = np.asarray(features.todense(), dtype=np.float64)
    onehot = np.vstack((ally, ty))
    onehot[test_idx, :] = onehot[test_sorted, :]
    labels = np.argmax(onehot, axis=1)

    n, p = features.shape
    num_classes = onehot.shape[1]
    if n != len(graph):
        sys.exit(f"feature rows ({n}) disagree with graph size ({len(graph)})")

    pairs = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v:
                pairs.add((min(u, v), max(u, v)))
    edges = sorted(pairs)

    test_set = set(int(i) for i in test_sorted)
    train = range(y.shape[0])
    val = [i for i in range(y.shape[0], min(y.shape[0] + 500, n)) if i not in test_set]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges_0.tsv", "w") as fh:
        for u, v in edges:
            fh.write(f"{u}\t{v}\n")
    with open(out / "features_0.txt", "w") as fh:
        fh.write(f"{n} {p}\n")
        np.savetxt(fh, features, fmt="%.9g")
    with open(out / "labels_0.tsv", "w") as fh:
        for i in range(n):
            fh.write(f"{i}\t{labels[i]}\n")
    with open(out / "splits_0.tsv", "w") as fh:
        for i in train:
            fh.write(f"{i}\ttrain\n")
        for i in val:
            fh.write(f"{i}\tval\n")
        for i in test_sorted:
            fh.write(f"{i}\ttest\n")
    manifest = {
        "task": "multi-class",
        "num_classes": int(num_classes),
        "blocks": [
            {
                "edges": "edges_0.tsv",
                "features": "features_0.txt",
                "labels": "labels_0.tsv",
                "splits": "splits_0.tsv",
                "undirected": True,
            }
        ],
    }
    with open(out / "dataset.json", "w") as fh:
        fh.write(json.dumps(manifest, indent=2) + "\n")

    hist = np.bincount(labels, minlength=num_classes)
    print(f"wrote {out}/dataset.json: {n} nodes, {len(edges)} undirected edges, "
          f"{num_classes} classes {hist.tolist()}")
    print(f"splits: train {len(train)}, val {len(val)}, test {len(test_sorted)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
