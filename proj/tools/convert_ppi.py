#!/usr/bin/env python3
"""Convert the GraphSAGE PPI distribution into the engine's dataset layout.

Expects in --in:
    ppi-G.json  ppi-id_map.json  ppi-class_map.json  ppi-feats.npy

The union graph splits into one connected component per tissue; each
component becomes its own graph block with locally renumbered nodes, and
every node keeps its published train/val/test flag. Labels are 121-way
multi-label bit vectors.
"""

import argparse
import json
import sys
from collections import deque
from pathlib import Path

import numpy as np


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--in", dest="src", default="raw/ppi", help="directory with ppi-* files")
    ap.add_argument("--out", dest="out", default="data/ppi", help="output dataset directory")
    args = ap.parse_args()

    src = Path(args.src)
    for name in ["ppi-G.json", "ppi-id_map.json", "ppi-class_map.json", "ppi-feats.npy"]:
        if not (src / name).exists():
            sys.exit(f"missing {src / name}")

    with open(src / "ppi-G.json") as fh:
        g = json.load(fh)
    with open(src / "ppi-id_map.json") as fh:
        id_map = {k: int(v) for k, v in json.load(fh).items()}
    with open(src / "ppi-class_map.json") as fh:
        class_map = json.load(fh)
    feats = np.asarray(np.load(src / "ppi-feats.npy"), dtype=np.float64)

    n = feats.shape[0]
    split = ["train"] * n
    for node in g["nodes"]:
        i = id_map[str(node["id"])]
        if node.get("test"):
            split[i] = "test"
        elif node.get("val"):
            split[i] = "val"

    bits = np.zeros((n, len(next(iter(class_map.values())))), dtype=np.int8)
    for key, vec in class_map.items():
        bits[id_map[key], :] = vec

    adj = [[] for _ in range(n)]
    pairs = set()
    for link in g["links"]:
        u, v = id_map[str(link["source"])], id_map[str(link["target"])]
        if u == v or (min(u, v), max(u, v)) in pairs:
            continue
        pairs.add((min(u, v), max(u, v)))
        adj[u].append(v)
        adj[v].append(u)

    # One component per tissue graph.
    component = [-1] * n
    blocks = []
    for start in range(n):
        if component[start] >= 0:
            continue
        members = [start]
        component[start] = len(blocks)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if component[v] < 0:
                    component[v] = len(blocks)
                    members.append(v)
                    queue.append(v)
        blocks.append(sorted(members))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_blocks = []
    split_counts = {"train": 0, "val": 0, "test": 0}
    for b, members in enumerate(blocks):
        local = {node: i for i, node in enumerate(members)}
        with open(out / f"edges_{b}.tsv", "w") as fh:
            block_pairs = sorted(
                (local[u], local[v]) if local[u] <= local[v] else (local[v], local[u])
                for u, v in pairs
                if component[u] == b
            )
            for u, v in block_pairs:
                fh.write(f"{u}\t{v}\n")
        with open(out / f"features_{b}.txt", "w") as fh:
            fh.write(f"{len(members)} {feats.shape[1]}\n")
            np.savetxt(fh, feats[members], fmt="%.17g")
        with open(out / f"labels_{b}.tsv", "w") as fh:
            for node in members:
                fh.write(f"{local[node]}\t{','.join(map(str, bits[node]))}\n")
        with open(out / f"splits_{b}.tsv", "w") as fh:
            for node in members:
                fh.write(f"{local[node]}\t{split[node]}\n")
                split_counts[split[node]] += 1
        manifest_blocks.append({
            "edges": f"edges_{b}.tsv",
            "features": f"features_{b}.txt",
            "labels": f"labels_{b}.tsv",
            "splits": f"splits_{b}.tsv",
            "undirected": True,
        })

    manifest = {
        "task": "multi-label",
        "num_classes": int(bits.shape[1]),
        "blocks": manifest_blocks,
    }
    with open(out / "dataset.json", "w") as fh:
        fh.write(json.dumps(manifest, indent=2) + "\n")

    print(f"wrote {out}/dataset.json: {len(blocks)} blocks, {n} nodes, "
          f"{len(pairs)} undirected edges, {bits.shape[1]} label bits")
    print(f"splits: train {split_counts['train']}, val {split_counts['val']}, "
          f"test {split_counts['test']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
