#!/usr/bin/env python3
"""Turn the raw UCI files under data/raw/ into categorical CSV tables.

Numeric columns are discretized with the Fayyad-Irani entropy/MDL criterion
(supervised, applied to the whole table). Categorical columns are copied as-is,
with the mushroom single-letter codes expanded to their attribute names.
Columns left with a single value are dropped.

Usage: python3 tools/prepare_datasets.py [--raw data/raw] [--out data]
"""

import argparse
import csv
import math
from collections import Counter
from pathlib import Path

MUSHROOM_COLUMNS = [
    ("cap-shape", "bell=b,conical=c,convex=x,flat=f,knobbed=k,sunken=s"),
    ("cap-surface", "fibrous=f,grooves=g,scaly=y,smooth=s"),
    ("cap-color", "brown=n,buff=b,cinnamon=c,gray=g,green=r,pink=p,purple=u,red=e,white=w,yellow=y"),
    ("bruises", "bruises=t,no=f"),
    ("odor", "almond=a,anise=l,creosote=c,fishy=y,foul=f,musty=m,none=n,pungent=p,spicy=s"),
    ("gill-attachment", "attached=a,descending=d,free=f,notched=n"),
    ("gill-spacing", "close=c,crowded=w,distant=d"),
    ("gill-size", "broad=b,narrow=n"),
    ("gill-color", "black=k,brown=n,buff=b,chocolate=h,gray=g,green=r,orange=o,pink=p,purple=u,red=e,white=w,yellow=y"),
    ("stalk-shape", "enlarging=e,tapering=t"),
    ("stalk-root", "bulbous=b,club=c,cup=u,equal=e,rhizomorphs=z,rooted=r"),
    ("stalk-surface-above-ring", "fibrous=f,scaly=y,silky=k,smooth=s"),
    ("stalk-surface-below-ring", "fibrous=f,scaly=y,silky=k,smooth=s"),
    ("stalk-color-above-ring", "brown=n,buff=b,cinnamon=c,gray=g,orange=o,pink=p,red=e,white=w,yellow=y"),
    ("stalk-color-below-ring", "brown=n,buff=b,cinnamon=c,gray=g,orange=o,pink=p,red=e,white=w,yellow=y"),
    ("veil-type", "partial=p,universal=u"),
    ("veil-color", "brown=n,orange=o,white=w,yellow=y"),
    ("ring-number", "none=n,one=o,two=t"),
    ("ring-type", "cobwebby=c,evanescent=e,flaring=f,large=l,none=n,pendant=p,sheathing=s,zone=z"),
    ("spore-print-color", "black=k,brown=n,buff=b,chocolate=h,green=r,orange=o,purple=u,white=w,yellow=y"),
    ("population", "abundant=a,clustered=c,numerous=n,scattered=s,several=v,solitary=y"),
    ("habitat", "grasses=g,leaves=l,meadows=m,paths=p,urban=u,waste=w,woods=d"),
]
MUSHROOM_CLASSES = {"e": "edible", "p": "poisonous"}


def entropy(counts):
    total = sum(counts.values())
    return -sum(c / total * math.log2(c / total) for c in counts.values() if c)


def mdl_cuts(values, labels):
    """Recursive Fayyad-Irani split points for one numeric column."""
    pairs = sorted(zip(values, labels))
    cuts = []

    def split(lo, hi):
        part = pairs[lo:hi]
        n = len(part)
        if n < 2:
            return
        whole = Counter(lbl for _, lbl in part)
        ent = entropy(whole)
        best = None
        left = Counter()
        for i in range(1, n):
            left[part[i - 1][1]] += 1
            if part[i - 1][0] == part[i][0]:
                continue
            right = whole - left
            e = (i * entropy(left) + (n - i) * entropy(right)) / n
            if best is None or e < best[0]:
                best = (e, i, Counter(left), right)
        if best is None:
            return
        e, i, lc, rc = best
        gain = ent - e
        k, k1, k2 = len(whole), len(lc), len(rc)
        delta = math.log2(3 ** k - 2) - (k * ent - k1 * entropy(lc) - k2 * entropy(rc))
        if gain <= (math.log2(n - 1) + delta) / n:
            return
        cuts.append((part[i - 1][0] + part[i][0]) / 2)
        split(lo, lo + i)
        split(lo + i, hi)

    split(0, len(pairs))
    return sorted(cuts)


def bin_label(value, cuts):
    idx = sum(1 for c in cuts if value > c)
    lo = "-inf" if idx == 0 else f"{cuts[idx - 1]:.4g}"
    hi = "inf" if idx == len(cuts) else f"{cuts[idx]:.4g}"
    return f"({lo};{hi}]"


def read_tab(path):
    lines = [ln.rstrip("\n").split("\t") for ln in path.read_text().splitlines()]
    header, types, roles, rows = lines[0], lines[1], lines[2], lines[3:]
    return header, types, roles, [r for r in rows if any(cell.strip() for cell in r)]


def table_from_tab(path, drop=()):
    header, types, roles, rows = read_tab(path)
    class_idx = next(i for i, r in enumerate(roles) if r.strip() == "class")
    keep = [i for i in range(len(header))
            if i != class_idx and header[i] not in drop and roles[i].strip() != "meta"]
    labels = [r[class_idx] for r in rows]
    columns = []
    for i in keep:
        col = [r[i] for r in rows]
        if types[i].strip() in ("c", "continuous"):
            nums = [float(v) for v in col]
            cuts = mdl_cuts(nums, labels)
            col = [bin_label(v, cuts) for v in nums]
        columns.append((header[i], col))
    return columns, labels


def write_csv(path, columns, labels):
    # A column with one value (no MDL cut, or constant like veil-type) only
    # pads antecedents without changing any p-value.
    columns = [(name, col) for name, col in columns if len(set(col)) > 1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([name for name, _ in columns] + ["class"])
        for row in range(len(labels)):
            w.writerow([col[row] for _, col in columns] + [labels[row]])


def mushroom(path):
    decode = [(name, {code: word for word, code in (kv.split("=") for kv in spec.split(","))})
              for name, spec in MUSHROOM_COLUMNS]
    columns = [(name, []) for name, _ in decode]
    labels = []
    for line in path.read_text().splitlines():
        cells = line.strip().split(",")
        if len(cells) != len(decode) + 1:
            continue
        for (name, codes), (_, col), cell in zip(decode, columns, cells):
            col.append(codes[cell])
        labels.append(MUSHROOM_CLASSES[cells[-1]])
    return columns, labels


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--raw", default="data/raw")
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    raw, out = Path(args.raw), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "iris.csv", *table_from_tab(raw / "iris.tab"))
    write_csv(out / "glass.csv", *table_from_tab(raw / "glass.tab", drop=("Id",)))
    write_csv(out / "zoo.csv", *table_from_tab(raw / "zoo.tab", drop=("name",)))
    write_csv(out / "mushroom.csv", *mushroom(raw / "mushroom.data"))


if __name__ == "__main__":
    main()
