#!/usr/bin/env python3
"""Independent reference evaluation for the eval3 fixture.

Overlaps come from shapely polygons built directly from the quads; AP is
computed in exact rational arithmetic. Writes expected.json next to this file.

    python3 oracle.py
"""

import json
import pathlib
from fractions import Fraction

from shapely.geometry import Polygon

HERE = pathlib.Path(__file__).resolve().parent
IOU_THR = 0.5
MARGIN = 0.02


def quad(tokens):
    xs = [float(t) for t in tokens]
    return Polygon(list(zip(xs[0::2], xs[1::2])))


def load_gt():
    gts = []
    for path in sorted((HERE / "gt").glob("*.txt")):
        for line in path.read_text().splitlines():
            t = line.split()
            if not t or t[0].startswith(("imagesource", "gsd")):
                continue
            gts.append(dict(image=path.stem, poly=quad(t[:8]), cat=t[8], difficult=t[9] == "1"))
    return gts


def load_det():
    dets = []
    for path in sorted((HERE / "det").glob("Task1_*.txt")):
        cat = path.stem[len("Task1_"):]
        for line in path.read_text().splitlines():
            t = line.split()
            if t:
                dets.append(dict(image=t[0], score=float(t[1]), poly=quad(t[2:10]), cat=cat))
    return dets


def iou(a, b):
    inter = a.intersection(b).area
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def labels_for(cat, dets, gts):
    cat_dets = [d for d in dets if d["cat"] == cat]
    # stable sort: ties keep file order
    cat_dets.sort(key=lambda d: -d["score"])
    matched = set()
    out = []
    for d in cat_dets:
        best, best_iou = None, 0.0
        for i, g in enumerate(gts):
            if g["cat"] != cat or g["image"] != d["image"] or i in matched:
                continue
            v = iou(d["poly"], g["poly"])
            assert abs(v - IOU_THR) > MARGIN, f"fixture IoU {v} too close to threshold"
            if v > best_iou:
                best, best_iou = i, v
        if best is None or best_iou < IOU_THR:
            out.append("fp")
        elif gts[best]["difficult"]:
            out.append("ignored")
        else:
            matched.add(best)
            out.append("tp")
    return out


def pr(labels, num_gt):
    tp = fp = 0
    points = []
    for l in labels:
        if l == "ignored":
            continue
        tp += l == "tp"
        fp += l == "fp"
        points.append((Fraction(tp, num_gt), Fraction(tp, tp + fp)))
    return points


def ap_voc07(points):
    total = Fraction(0)
    for k in range(11):
        t = Fraction(k, 10)
        total += max((p for r, p in points if r >= t), default=Fraction(0))
    return total / 11


def ap_continuous(points):
    mrec = [Fraction(0)] + [r for r, _ in points] + [Fraction(1)]
    mpre = [Fraction(0)] + [p for _, p in points] + [Fraction(0)]
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    return sum((mrec[i + 1] - mrec[i]) * mpre[i + 1] for i in range(len(mrec) - 1))


def main():
    gts, dets = load_gt(), load_det()
    result = {"iou_thr": IOU_THR}
    for mode, fn in (("voc07", ap_voc07), ("continuous", ap_continuous)):
        per_class = {}
        for cat in sorted({g["cat"] for g in gts}):
            num_gt = sum(1 for g in gts if g["cat"] == cat and not g["difficult"])
            if num_gt == 0:
                continue
            per_class[cat] = fn(pr(labels_for(cat, dets, gts), num_gt))
        mean = sum(per_class.values()) / len(per_class)
        result[mode] = {
            "per_class_ap": {c: float(v) for c, v in per_class.items()},
            "per_class_ap_exact": {c: str(v) for c, v in per_class.items()},
            "map": float(mean),
            "map_exact": str(mean),
        }
    (HERE / "expected.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(json.dumps(result, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
