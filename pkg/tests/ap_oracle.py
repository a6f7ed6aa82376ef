"""Brute-force average-precision oracle, independent of the library code.

Enumerates every distinct confidence as a threshold; at each threshold the
kept predictions are matched greedily in confidence order (ties by image
then input order) against unmatched ground truth, giving one PR point per
threshold.  AP integrates the precision envelope straight from its
definition with explicit scans, no cumulative trickery shared with the
implementation under test.
"""

import math


def _angle_sym_deg(a, b):
    dot = abs(a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
    return math.degrees(math.acos(min(1.0, max(0.0, dot))))


def _match_at_threshold(gt_sets, entries, threshold, theta_deg):
    used = [[False] * len(g) for g in gt_sets]
    tp = fp = 0
    for conf, img, _, orientation in entries:
        if conf < threshold:
            break
        best_j = -1
        best_angle = None
        for j, g in enumerate(gt_sets[img]):
            if used[img][j]:
                continue
            angle = _angle_sym_deg(orientation, g)
            if best_angle is None or angle < best_angle:
                best_angle = angle
                best_j = j
        if best_j >= 0 and best_angle <= theta_deg:
            used[img][best_j] = True
            tp += 1
        else:
            fp += 1
    return tp, fp


def oracle_ap(gt_sets, pred_sets, theta_deg):
    """Reference AP for per-image ground-truth orientations and predictions.

    gt_sets: per image, a list of unit 3-vectors.  pred_sets: per image, a
    list of (orientation, confidence) pairs.  Returns the envelope AP.
    """
    total_gt = sum(len(g) for g in gt_sets)
    if total_gt == 0:
        raise ValueError("oracle AP needs ground truth")
    entries = []
    for img, preds in enumerate(pred_sets):
        for order, (orientation, conf) in enumerate(preds):
            entries.append((conf, img, order, orientation))
    entries.sort(key=lambda e: (-e[0], e[1], e[2]))
    points = []
    for threshold in sorted({e[0] for e in entries}, reverse=True):
        tp, fp = _match_at_threshold(gt_sets, entries, threshold, theta_deg)
        points.append((tp / total_gt, tp / (tp + fp)))
    ap = 0.0
    previous_recall = 0.0
    for recall, _ in points:
        if recall <= previous_recall:
            continue
        best_precision = max(p for r, p in points if r >= recall)
        ap += (recall - previous_recall) * best_precision
        previous_recall = recall
    return ap
