#!/usr/bin/env python3
"""Convert citation datasets to the edges/features/labels text files.

Two raw layouts are understood:

  LINQS:     planetoid_to_text.py --content cora.content --cites cora.cites --out DIR
  Planetoid: planetoid_to_text.py --planetoid RAW_DIR --name cora --out DIR
             (reads ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index})

Node ids are renumbered 0..n-1. Nodes without a label get -1.
"""

import argparse
import os
import pickle
import sys

import numpy as np
import scipy.sparse as sp


def read_linqs(content, cites):
    ids, rows, names = {}, [], []
    with open(content) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            ids[parts[0]] = len(ids)
            rows.append([float(v) for v in parts[1:-1]])
            names.append(parts[-1])
    classes = {c: i for i, c in enumerate(sorted(set(names)))}
    labels = np.array([classes[c] for c in names])
    edges = []
    with open(cites) as f:
        for line in f:
            parts = line.split()
            if len(parts) == 2 and parts[0] in ids and parts[1] in ids:
                edges.append((ids[parts[0]], ids[parts[1]]))
    return np.array(rows), labels, edges


def read_planetoid(raw, name):
    def load(suffix):
        with open(os.path.join(raw, f"ind.{name}.{suffix}"), "rb") as f:
            return pickle.load(f, encoding="latin1")

    x, y, tx, ty, allx, ally, graph = (load(s) for s in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    with open(os.path.join(raw, f"ind.{name}.test.index")) as f:
        test_index = [int(line) for line in f if line.strip()]
    order = np.sort(test_index)
    if name == "citeseer":
        # Isolated test nodes are missing from tx/ty; pad them with zero rows.
        full = range(min(test_index), max(test_index) + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[order - min(order), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[order - min(order), :] = ty
        ty = ty_ext
    features = sp.vstack((allx, tx)).tolil()
    features[test_index, :] = features[order, :]
    onehot = np.vstack((ally, ty))
    onehot[test_index, :] = onehot[order, :]
    labels = np.where(onehot.sum(axis=1) > 0, onehot.argmax(axis=1), -1)
    n = features.shape[0]
    edges = [(u, v) for u, nbrs in graph.items() for v in nbrs if u < n and v < n]
    return features.toarray(), labels, edges


def write(out, features, labels, edges):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "edges.txt"), "w") as f:
        for u, v in edges:
            if u != v:
                f.write(f"{u} {v}\n")
    with open(os.path.join(out, "features.txt"), "w") as f:
        for i, row in enumerate(features):
            f.write(str(i) + " " + " ".join(repr(float(v)) if v != int(v) else str(int(v)) for v in row) + "\n")
    with open(os.path.join(out, "labels.txt"), "w") as f:
        for i, c in enumerate(labels):
            f.write(f"{i} {int(c)}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--content")
    ap.add_argument("--cites")
    ap.add_argument("--planetoid")
    ap.add_argument("--name")
    ap.add_argument("--out", required=True)
    a = ap.parse_args()
    if a.content and a.cites:
        features, labels, edges = read_linqs(a.content, a.cites)
    elif a.planetoid and a.name:
        features, labels, edges = read_planetoid(a.planetoid, a.name)
    else:
        ap.error("give --content/--cites or --planetoid/--name")
    write(a.out, features, labels, edges)
    print(f"{len(labels)} nodes, {len(edges)} edge lines, {features.shape[1]} features", file=sys.stderr)


if __name__ == "__main__":
    main()
