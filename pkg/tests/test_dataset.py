import struct

import numpy as np
import pytest

from litmap.clustering import NOISE
from litmap.corpus import Article
from litmap.dataset import DatasetError, MapDataset, build_keyword_index


def placed_article(pmid, x, y, **kw):
    return Article(pmid=pmid, x=x, y=y, **kw)


class TestConstruction:
    def test_requires_articles(self):
        with pytest.raises(DatasetError):
            MapDataset(dataset_id="d", articles=[])

    def test_requires_coordinates(self):
        arts = [placed_article("1", 0.0, 0.0), Article(pmid="2")]
        with pytest.raises(DatasetError, match="2"):
            MapDataset(dataset_id="d", articles=arts)

    def test_indexes_built(self):
        arts = [
            placed_article("1", 0.0, 0.0, title="aortic valve repair"),
            placed_article("2", 1.0, 1.0, title="valve replacement"),
        ]
        ds = MapDataset(dataset_id="d", articles=arts)
        assert ds.n == 2
        assert ds.by_pmid["2"].title == "valve replacement"
        assert ds.quadtree.query_circle((0.0, 0.0), 0.1) == {"1"}
        assert set(ds.keyword_index["valve"]) == {"1", "2"}

    def test_cluster_of_defaults_to_noise(self):
        ds = MapDataset(dataset_id="d", articles=[placed_article("1", 0.0, 0.0)])
        assert ds.cluster_of("1") == NOISE
        assert ds.cluster_of("nope") == NOISE
        assert ds.cluster_ids() == set()


class TestKeywordIndex:
    def test_term_frequencies(self):
        arts = [
            Article(pmid="1", title="heart heart", abstract="valve"),
            Article(pmid="2", title="Heart disease"),
        ]
        index = build_keyword_index(arts)
        assert index["heart"] == {"1": 2, "2": 1}
        assert index["valve"] == {"1": 1}
        assert index["disease"] == {"2": 1}


class TestPointsBlock:
    def test_binary_layout_round_trip(self):
        arts = [
            placed_article("10", 1.5, -2.25, date="1999-05-01", size=3.0),
            placed_article("11", 0.0, 7.125, date="2004", size=0.5),
            placed_article("12", -4.0, 0.0, size=1.0),  # no date -> year 0
        ]
        ds = MapDataset(dataset_id="d", articles=arts)
        blob = ds.points_block
        assert blob[:4] == b"PTS1"
        n = struct.unpack_from("<I", blob, 4)[0]
        assert n == 3
        off = 8
        xs = np.frombuffer(blob, "<f4", n, off)
        ys = np.frombuffer(blob, "<f4", n, off + 4 * n)
        years = np.frombuffer(blob, "<u2", n, off + 8 * n)
        clusters = np.frombuffer(blob, "<i4", n, off + 10 * n)
        sizes = np.frombuffer(blob, "<f4", n, off + 14 * n)
        assert len(blob) == 8 + 18 * n
        np.testing.assert_array_equal(xs, np.array([1.5, 0.0, -4.0], "<f4"))
        np.testing.assert_array_equal(ys, np.array([-2.25, 7.125, 0.0], "<f4"))
        np.testing.assert_array_equal(years, [1999, 2004, 0])
        np.testing.assert_array_equal(clusters, [NOISE, NOISE, NOISE])
        np.testing.assert_array_equal(sizes, np.array([3.0, 0.5, 1.0], "<f4"))

    def test_row_order_follows_article_order(self):
        arts = [placed_article(str(i), float(i), 0.0) for i in (5, 3, 9)]
        ds = MapDataset(dataset_id="d", articles=arts)
        xs = np.frombuffer(ds.points_block, "<f4", 3, 8)
        np.testing.assert_array_equal(xs, np.array([5.0, 3.0, 9.0], "<f4"))


class TestLoad:
    def test_load_full_artifact_directory(self, pipeline_dir, dataset):
        assert dataset.dataset_id == "fixture"
        assert dataset.n == 60
        assert dataset.tree is not None and dataset.tree.n_levels >= 1
        assert dataset.labels is not None and len(dataset.labels) == len(dataset.tree.nodes)
        assert dataset.edges is not None and len(dataset.edges) > 0
        assert dataset.embeddings is not None
        assert dataset.embeddings.row_ids == [a.pmid for a in dataset.articles]
        assert dataset.manifest["counts"]["articles"] == 60

    def test_assignments_match_finest_level(self, dataset):
        for node in dataset.tree.level_nodes(0):
            for pmid in node.members:
                assert dataset.cluster_of(pmid) == node.cluster_id
        clustered = {p for n in dataset.tree.level_nodes(0) for p in n.members}
        for art in dataset.articles:
            if art.pmid not in clustered:
                assert dataset.cluster_of(art.pmid) == NOISE

    def test_points_tsv_parses_back(self, dataset):
        from litmap.corpus import parse_tsv

        again = parse_tsv(dataset.points_tsv().decode("utf-8"))
        assert [a.pmid for a in again] == [a.pmid for a in dataset.articles]
        assert dataset.points_tsv() is dataset.points_tsv()  # cached

    def test_labels_attached_to_tree_nodes(self, dataset):
        for node in dataset.tree.nodes:
            assert dataset.labels[node.cluster_id].label == node.label

    def test_missing_map_tsv_raises(self, tmp_path):
        with pytest.raises(DatasetError, match="map.tsv"):
            MapDataset.load("x", tmp_path)

    def test_optional_artifacts_absent(self, tmp_path):
        (tmp_path / "map.tsv").write_text(
            "pmid\tdate\tjournal\ttitle\tabstract\tmesh_terms\tx\ty\tcitation_count\tsize\tcolor\n"
            "1\t\t\tt\t\t\t0.5\t0.5\t0\t1.0\t\n",
            encoding="utf-8",
        )
        ds = MapDataset.load("bare", tmp_path)
        assert ds.tree is None and ds.labels is None and ds.edges is None
        assert ds.embeddings is None
        assert ds.manifest == {}
        assert ds.cluster_of("1") == NOISE
