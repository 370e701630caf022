"""Cluster labels from class-based term statistics.

Each cluster's term pool comes from MeSH terms when at least half of its
articles carry them, otherwise from lowercase title+abstract unigrams with
stopwords removed.  Scores follow W(t,c) = tf(t,c) * log(1 + A / f(t)) where
the totals A and f(t) are taken over a contrast group: all clusters at the
same level for the global variant, or only the siblings under a shared
parent for the tree-local variant that separates fine clusters from each
other.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .clustering import ClusterTree
from .corpus import Article
from .embedding import tokenize

STOPWORDS_VERSION = "en-basic-1"

STOPWORDS = frozenset(
    """
    a about above after again against all also am an and any are as at be
    because been before being below between both but by can could did do does
    doing down during each few for from further had has have having he her
    here hers herself him himself his how i if in into is it its itself just
    may me might more most much must my myself no nor not now of off on once
    only or other our ours ourselves out over own same she should so some
    such than that the their theirs them themselves then there these they
    this those through to too under until up upon very was we were what when
    where which while who whom why will with within without would you your
    yours yourself
    """.split()
)


class LabelingError(Exception):
    pass


@dataclass
class TermStats:
    counts: dict[int, Counter]  # cluster_id -> term occurrence counts
    levels: dict[int, int]
    parents: dict[int, int | None]

    def level_group(self, cluster_id: int) -> list[int]:
        level = self.levels[cluster_id]
        return sorted(c for c, lv in self.levels.items() if lv == level)

    def sibling_group(self, cluster_id: int) -> list[int]:
        parent = self.parents[cluster_id]
        if parent is None:
            return [cluster_id]
        return sorted(c for c, p in self.parents.items() if p == parent)


@dataclass
class TopicLabel:
    cluster_id: int
    terms: list[tuple[str, float]] = field(default_factory=list)
    label: str = "(unlabeled)"


def article_terms(article: Article) -> tuple[list[str], bool]:
    """(terms, has_mesh) for one article; MeSH terms count once each."""
    mesh = [t.strip().lower() for t in article.mesh_terms if t.strip()]
    if mesh:
        return mesh, True
    return [], False


def text_terms(article: Article) -> list[str]:
    return [t for t in tokenize(article.text()) if t not in STOPWORDS]


def aggregate_terms(tree: ClusterTree, articles: list[Article]) -> TermStats:
    """Per-cluster term counts at every level of the tree.

    A cluster counts MeSH terms when >= 50% of its articles have them;
    otherwise it falls back to title+abstract unigrams minus stopwords.
    """
    by_pmid = {a.pmid: a for a in articles}
    counts: dict[int, Counter] = {}
    levels: dict[int, int] = {}
    parents: dict[int, int | None] = {}
    for node in tree.nodes:
        levels[node.cluster_id] = node.level
        parents[node.cluster_id] = node.parent_id
        members = [by_pmid[p] for p in node.members if p in by_pmid]
        with_mesh = sum(1 for a in members if a.mesh_terms)
        counter: Counter = Counter()
        if members and with_mesh * 2 >= len(members):
            for a in members:
                terms, has = article_terms(a)
                if has:
                    counter.update(set(terms))
        else:
            for a in members:
                counter.update(text_terms(a))
        counts[node.cluster_id] = counter
    return TermStats(counts=counts, levels=levels, parents=parents)


def _score_against_group(stats: TermStats, cluster_id: int, group: list[int]) -> list[tuple[str, float]]:
    own = stats.counts[cluster_id]
    if not own:
        return []
    group_counts = [stats.counts[c] for c in group]
    totals = [sum(c.values()) for c in group_counts]
    avg_per_cluster = sum(totals) / len(group)
    scored = []
    for term, tf in own.items():
        f = sum(c.get(term, 0) for c in group_counts)
        w = tf * math.log(1.0 + avg_per_cluster / f)
        scored.append((term, w))
    scored.sort(key=lambda ts: (-ts[1], ts[0]))
    return scored


def ctfidf(stats: TermStats, cluster_id: int) -> list[tuple[str, float]]:
    """W(t,c) = tf(t,c) * log(1 + A / f(t)) against all same-level clusters."""
    if cluster_id not in stats.counts:
        raise LabelingError(f"unknown cluster {cluster_id}")
    return _score_against_group(stats, cluster_id, stats.level_group(cluster_id))


def tree_tfidf(
    stats: TermStats, cluster_id: int, sibling_group: list[int] | None = None
) -> list[tuple[str, float]]:
    """Same formula with totals restricted to the siblings under one parent.

    A singleton group has no local contrast, so it falls back to the global
    scores.
    """
    if cluster_id not in stats.counts:
        raise LabelingError(f"unknown cluster {cluster_id}")
    group = sibling_group if sibling_group is not None else stats.sibling_group(cluster_id)
    if cluster_id not in group:
        raise LabelingError("sibling_group must contain the cluster itself")
    if len(group) < 2:
        return ctfidf(stats, cluster_id)
    return _score_against_group(stats, cluster_id, group)


def top_labels(scored: list[tuple[str, float]], cluster_id: int, k: int = 3) -> TopicLabel:
    if k < 1:
        raise LabelingError("k must be >= 1")
    if not scored:
        return TopicLabel(cluster_id=cluster_id)
    top = scored[:k]
    return TopicLabel(cluster_id=cluster_id, terms=top, label=", ".join(t for t, _ in top))


def label_tree(tree: ClusterTree, articles: list[Article], k: int = 3) -> dict[int, TopicLabel]:
    """Fill every node's label: sibling-local scores for parented clusters,
    corpus-wide scores for roots.  Mutates the tree nodes in place."""
    stats = aggregate_terms(tree, articles)
    labels: dict[int, TopicLabel] = {}
    for node in tree.nodes:
        if node.parent_id is None:
            scored = ctfidf(stats, node.cluster_id)
        else:
            scored = tree_tfidf(stats, node.cluster_id)
        topic = top_labels(scored, node.cluster_id, k)
        labels[node.cluster_id] = topic
        node.label = topic.label
    return labels


def labels_to_json(labels: dict[int, TopicLabel]) -> dict:
    return {
        "stopwords_version": STOPWORDS_VERSION,
        "labels": [
            {
                "cluster_id": topic.cluster_id,
                "label": topic.label,
                "terms": [{"term": t, "score": s} for t, s in topic.terms],
            }
            for _cid, topic in sorted(labels.items())
        ],
    }
