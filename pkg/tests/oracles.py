"""Independent straight-line reference implementations.

These are deliberately naive (list-of-sets, full rescans, no union-find,
no caching) and serve as oracles for the optimized library code.  They are
written directly from the documented contracts and share no code with the
package.
"""

from __future__ import annotations

import numpy as np


def ref_cluster_layer(num_nodes, node_labels, edges, features, tau):
    """One threshold merge pass, list-of-sets bookkeeping.

    Returns (clusters, labels, pooled) where clusters are sorted member
    lists ordered by smallest member, labels the single optional label per
    cluster, pooled the elementwise max of member feature rows.
    """
    feats = np.asarray(features, dtype=np.float64)
    clusters = [{i} for i in range(num_nodes)]
    labels = list(node_labels)

    def dist(a, b):
        return float(np.linalg.norm(feats[a] - feats[b]))

    order = sorted(edges, key=lambda e: (dist(e[0], e[1]), (min(e), max(e))))
    for a, b in order:
        ca = next(i for i, c in enumerate(clusters) if a in c)
        cb = next(i for i, c in enumerate(clusters) if b in c)
        if ca == cb:
            continue
        if labels[ca] is not None and labels[cb] is not None:
            continue
        if dist(a, b) < tau:
            lo, hi = min(ca, cb), max(ca, cb)
            clusters[lo] |= clusters[hi]
            labels[lo] = labels[lo] if labels[lo] is not None else labels[hi]
            del clusters[hi]
            del labels[hi]

    paired = sorted(zip(clusters, labels), key=lambda cl: min(cl[0]))
    members = [sorted(c) for c, _ in paired]
    out_labels = [l for _, l in paired]
    pooled = np.stack([feats[m].max(axis=0) for m in members])
    return members, out_labels, pooled


def ref_quotient_edges(edges, assignment):
    """Brute-force edge quotient under a node -> cluster map."""
    return sorted({(min(assignment[a], assignment[b]),
                    max(assignment[a], assignment[b]))
                   for a, b in edges if assignment[a] != assignment[b]})


def ref_cluster_final(num_nodes, node_labels, edges, features):
    """Greedy absorption sweeps, dict bookkeeping.

    Returns (members, labels, features, edges) over surviving nodes in
    ascending original id order.
    """
    feats = {i: np.array(features[i], dtype=np.float64)
             for i in range(num_nodes)}
    labels = dict(enumerate(node_labels))
    members = {i: [i] for i in range(num_nodes)}
    neigh = {i: set() for i in range(num_nodes)}
    for a, b in edges:
        neigh[a].add(b)
        neigh[b].add(a)

    while any(labels[i] is None for i in members):
        for i in sorted(members):
            if i not in members or labels[i] is not None:
                continue
            if not neigh[i]:
                raise AssertionError(f"node {i} has no neighbors")
            target = min(neigh[i],
                         key=lambda k: (float(np.linalg.norm(feats[i] - feats[k])), k))
            feats[target] = np.maximum(feats[target], feats[i])
            members[target] += members[i]
            for k in neigh[i]:
                neigh[k].discard(i)
                if k != target:
                    neigh[k].add(target)
                    neigh[target].add(k)
            del feats[i], labels[i], members[i], neigh[i]

    order = sorted(members)
    out_edges = sorted({(min(order.index(a), order.index(b)),
                         max(order.index(a), order.index(b)))
                        for a in order for b in neigh[a]})
    return ([sorted(members[i]) for i in order], [labels[i] for i in order],
            np.stack([feats[i] for i in order]), out_edges)


def ref_felzenszwalb(n, edges, kappa, min_size=1):
    """Graph segmentation with Int(C) recomputed from scratch every step.

    ``edges`` are (weight, a, b) triples.  Returns dense per-point segment
    ids ordered by smallest member.
    """
    comps = [{i} for i in range(n)]
    merged_edges = []

    def comp_of(x):
        return next(i for i, c in enumerate(comps) if x in c)

    def internal(ci):
        inside = [w for w, a, b in merged_edges
                  if a in comps[ci] and b in comps[ci]]
        return max(inside) if inside else 0.0

    for w, a, b in sorted(edges, key=lambda e: (e[0], e[1], e[2])):
        ca, cb = comp_of(a), comp_of(b)
        if ca == cb:
            continue
        if w <= min(internal(ca) + kappa / len(comps[ca]),
                    internal(cb) + kappa / len(comps[cb])):
            comps[ca] |= comps[cb]
            del comps[cb]
            merged_edges.append((w, a, b))

    # fold undersized components: rounds, ascending smallest member, each
    # following its cheapest (weight, a, b) outgoing edge from round start
    while True:
        choice = {}
        for w, a, b in sorted(edges, key=lambda e: (e[0], e[1], e[2])):
            ca, cb = comp_of(a), comp_of(b)
            if ca == cb:
                continue
            choice.setdefault(min(comps[ca]), (a, b))
            choice.setdefault(min(comps[cb]), (a, b))
        small = sorted(min(c) for c in comps if len(c) < min_size)
        if not small:
            break
        progressed = False
        for key in small:
            ci = comp_of(key)
            if len(comps[ci]) >= min_size or key not in choice:
                continue
            a, b = choice[key]
            ca, cb = comp_of(a), comp_of(b)
            dst = cb if ca == ci else ca
            if dst != ci:
                comps[min(ci, dst)] |= comps[max(ci, dst)]
                del comps[max(ci, dst)]
                progressed = True
        if not progressed:
            break

    comps.sort(key=min)
    ids = np.empty(n, dtype=np.int64)
    for i, c in enumerate(comps):
        ids[sorted(c)] = i
    return ids


def ref_semantic_iou(pred, gt_semantic):
    """Per-class IoU by explicit point loops; gt -1 points skipped."""
    per_class = {}
    classes = {c for c in list(pred) + list(gt_semantic) if c >= 0}
    for c in sorted(classes):
        inter = union = 0
        for p, g in zip(pred, gt_semantic):
            if g < 0:
                continue
            hit_p, hit_g = p == c, g == c
            if hit_p and hit_g:
                inter += 1
            if hit_p or hit_g:
                union += 1
        if union:
            per_class[c] = inter / union
    return per_class


def ref_instance_iou(pred, gt_instance):
    """Per-id IoU the same way, mask where gt has an instance."""
    per_id = {}
    ids = set()
    for p, g in zip(pred, gt_instance):
        if g < 0:
            continue
        for i in (p, g):
            if i >= 0:
                ids.add(i)
    for inst in sorted(ids):
        inter = union = 0
        for p, g in zip(pred, gt_instance):
            if g < 0:
                continue
            if p == inst and g == inst:
                inter += 1
            if p == inst or g == inst:
                union += 1
        per_id[inst] = inter / union if union else 0.0
    return per_id


def connected_components(n, edges):
    """Plain BFS components; returns a list of sorted vertex lists."""
    adj = {i: [] for i in range(n)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = set()
    comps = []
    for start in range(n):
        if start in seen:
            continue
        queue, comp = [start], set()
        while queue:
            v = queue.pop()
            if v in comp:
                continue
            comp.add(v)
            queue.extend(adj[v])
        seen |= comp
        comps.append(sorted(comp))
    return comps


def min_pairwise_distance(points, idxs):
    best = np.inf
    for i, a in enumerate(idxs):
        for b in idxs[i + 1:]:
            best = min(best, float(np.linalg.norm(points[a] - points[b])))
    return best


def random_labeled_graph(rng, max_nodes=12, dim=4):
    """Random connected-enough test graph: features, labels (>=1 per
    component), edges.  Returns (num_nodes, labels, edges, features)."""
    n = int(rng.integers(2, max_nodes + 1))
    features = rng.uniform(-5.0, 5.0, size=(n, dim))
    edges = set()
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < 0.45:
                edges.add((a, b))
    labels = [None] * n
    comps = connected_components(n, edges)
    next_instance = 0
    for comp in comps:
        k = int(rng.integers(1, len(comp) + 1))
        picks = rng.choice(comp, size=min(k, len(comp)), replace=False)
        for p in picks:
            labels[int(p)] = (int(rng.integers(0, 5)), next_instance)
            next_instance += 1
    return n, labels, sorted(edges), features
