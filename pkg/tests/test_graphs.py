import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_neighbors
from spheregraph.errors import InvalidArgumentError, SingularWeightError
from spheregraph.graphs import (
    GaussianGraphFamily,
    Graph,
    WeightScheme,
    build_graph,
    heuristic_kernel_width,
    knn_edges,
    laplacian,
    largest_eigenvalue,
)
from spheregraph.io import read_sparse_csv, write_sparse_csv
from spheregraph.samplings import (
    Sampling,
    equiangular_sampling,
    healpix_sampling,
    icosahedral_sampling,
)


def two_point_graph(w: float) -> Graph:
    a = sp.coo_matrix((np.array([w, w]), ([0, 1], [1, 0])), shape=(2, 2)).tocsr()
    return Graph(2, a, np.array([w, w]), 1, WeightScheme("inverse-distance"))


class TestKnnEdges:
    def test_cardinality(self):
        nb = knn_edges(healpix_sampling(1), 4)
        assert nb.shape == (12, 4)
        assert not np.any(nb == np.arange(12)[:, None])

    def test_icosahedron_adjacency(self, ico0):
        nb = knn_edges(ico0, 5)
        for i in range(12):
            assert set(nb[i]) == brute_force_neighbors(ico0.points, i, 5)

    def test_matches_exhaustive_scan(self):
        s = equiangular_sampling(2)
        nb = knn_edges(s, 4)
        d = np.linalg.norm(s.points[:, None] - s.points[None, :], axis=2)
        for i in range(s.n):
            mine = np.sort(d[i, nb[i]])
            brute = np.sort(d[i, sorted(brute_force_neighbors(s.points, i, 4))])
            np.testing.assert_allclose(mine, brute, atol=1e-12)

    def test_tie_break_prefers_lower_index(self):
        # a regular square: both antipodal-ring neighbors are equidistant
        s = equiangular_sampling(1)
        nb = knn_edges(s, 2)
        d = np.linalg.norm(s.points[:, None] - s.points[None, :], axis=2)
        for i in range(s.n):
            ranked = sorted((d[i, j], j) for j in range(s.n) if j != i)[:2]
            assert set(nb[i]) == {j for _, j in ranked}

    def test_k_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            knn_edges(healpix_sampling(1), 12)


class TestBuildGraph:
    def test_inverse_distance_formula(self):
        # two vertices at chordal distance exactly 0.5 (plus two far-away fillers)
        theta = 2.0 * np.arcsin(0.25)
        pts = np.array([
            [0.0, 0.0, 1.0],
            [np.sin(theta), 0.0, np.cos(theta)],
            [0.0, np.sin(2.0), np.cos(2.0)],
            [np.sin(2.5), 0.0, np.cos(2.5)],
        ])
        s = Sampling(pts, "custom", 4)
        g = build_graph(s, 1, WeightScheme("inverse-distance"))
        assert abs(g.adjacency[0, 1] - 2.0) < 1e-12

    def test_weight_values(self, healpix4_ring):
        g = build_graph(healpix4_ring, 6, WeightScheme("inverse-distance"))
        i, j = g.adjacency.nonzero()[0][0], g.adjacency.nonzero()[1][0]
        dist = np.linalg.norm(healpix4_ring.points[i] - healpix4_ring.points[j])
        assert abs(g.adjacency[i, j] - 1.0 / dist) < 1e-14

        t = 0.25
        g = build_graph(healpix4_ring, 6, WeightScheme("gaussian", t))
        dist = np.linalg.norm(healpix4_ring.points[i] - healpix4_ring.points[j])
        assert abs(g.adjacency[i, j] - np.exp(-dist**2 / (4 * t))) < 1e-14

    def test_gaussian_unit_distance_quarter_width(self):
        assert abs(np.exp(-(1.0**2) / (4 * 0.25)) - np.exp(-1.0)) < 1e-15

    def test_dense_oracle_healpix8(self, healpix8_ring):
        s = healpix8_ring
        k = 8
        t = heuristic_kernel_width(s, k)
        g = build_graph(s, k, WeightScheme("gaussian", t))
        # dense brute-force construction of the same tie-inclusive union support
        d = np.linalg.norm(s.points[:, None] - s.points[None, :], axis=2)
        full = np.exp(-(d**2) / (4 * t))
        np.fill_diagonal(full, 0.0)
        support = np.zeros((s.n, s.n), dtype=bool)
        for i in range(s.n):
            nonself = np.sort(d[i][np.arange(s.n) != i])
            thresh = nonself[k - 1] * (1 + 1e-12)
            for j in range(s.n):
                if j != i and d[i, j] <= thresh:
                    support[i, j] = support[j, i] = True
        expected = np.where(support, full, 0.0)
        np.testing.assert_allclose(g.adjacency.toarray(), expected, atol=1e-12)

    def test_support_is_distance_determined(self):
        # a rotation that permutes the sampling must permute the graph exactly
        from spheregraph.samplings import rotation_permutation, z_rotation_matrix

        for nside, k in ((2, 8), (4, 8), (4, 7), (8, 20)):
            s = healpix_sampling(nside)
            perm = rotation_permutation(s, z_rotation_matrix(np.pi / 2))
            a = build_graph(s, k, WeightScheme("inverse-distance")).adjacency.toarray()
            assert np.abs(a[np.ix_(perm, perm)] - a).max() < 1e-12

    def test_sparsity_bound(self):
        for s, k in ((healpix_sampling(4), 8), (healpix_sampling(8), 8),
                     (healpix_sampling(8), 20), (equiangular_sampling(8), 4),
                     (icosahedral_sampling(2), 6)):
            g = build_graph(s, k, WeightScheme("inverse-distance"))
            assert g.adjacency.nnz <= 2 * k * s.n

    def test_symmetry_and_invariants(self):
        for s, k in ((healpix_sampling(2), 8), (icosahedral_sampling(1), 5)):
            g = build_graph(s, k, WeightScheme("gaussian", heuristic_kernel_width(s, k)))
            assert (g.adjacency != g.adjacency.T).nnz == 0
            assert np.all(g.adjacency.diagonal() == 0.0)
            assert np.all(g.adjacency.data > 0)
            assert g.adjacency.nnz <= 2 * k * s.n
            np.testing.assert_allclose(
                g.degrees, np.asarray(g.adjacency.sum(axis=1)).ravel(), rtol=1e-12
            )

    def test_every_vertex_keeps_k_nearest(self, healpix4_ring):
        # union symmetrization only adds edges: the k nearest of each vertex stay
        g = build_graph(healpix4_ring, 6, WeightScheme("inverse-distance"))
        nb = knn_edges(healpix4_ring, 6)
        for i in range(healpix4_ring.n):
            assert set(nb[i]) <= set(g.adjacency[i].indices)

    def test_coincident_points_inverse_distance(self):
        pts = np.array([[0, 0, 1.0], [0, 0, 1.0], [1, 0, 0.0], [0, 1, 0.0]])
        s = Sampling(pts, "custom", 4)
        with pytest.raises(SingularWeightError):
            build_graph(s, 2, WeightScheme("inverse-distance"))

    def test_weight_scheme_validation(self):
        with pytest.raises(InvalidArgumentError):
            WeightScheme("gaussian")
        with pytest.raises(InvalidArgumentError):
            WeightScheme("gaussian", -1.0)
        with pytest.raises(InvalidArgumentError):
            WeightScheme("inverse-distance", 0.3)

    @given(st.floats(0.05, 1.9), st.floats(0.05, 1.9), st.floats(1e-3, 10.0))
    @settings(max_examples=50, deadline=None)
    def test_gaussian_weight_monotone_in_distance(self, d1, d2, t):
        w1 = np.exp(-(d1**2) / (4 * t))
        w2 = np.exp(-(d2**2) / (4 * t))
        if d1 < d2:
            assert w1 > w2


class TestLaplacian:
    def test_single_edge(self):
        lap = laplacian(two_point_graph(0.7)).toarray()
        np.testing.assert_allclose(lap, [[0.7, -0.7], [-0.7, 0.7]], atol=0)

    def test_annihilates_constants(self, healpix8_ring):
        g = build_graph(healpix8_ring, 8, WeightScheme("inverse-distance"))
        lap = laplacian(g)
        ones = np.ones(healpix8_ring.n)
        row_scale = np.abs(lap).sum(axis=1).max()
        assert np.abs(lap @ ones).max() < 1e-10 * row_scale

    def test_psd_dense_oracle(self):
        s = healpix_sampling(2)
        lap = laplacian(build_graph(s, 8, WeightScheme("gaussian", heuristic_kernel_width(s, 8))))
        eigs = np.linalg.eigvalsh(lap.toarray())
        assert eigs.min() >= -1e-9

    def test_psd_random_quadratic_forms(self, healpix4_ring):
        lap = laplacian(build_graph(healpix4_ring, 8, WeightScheme("inverse-distance")))
        rng = np.random.default_rng(0)
        for _ in range(100):
            f = rng.standard_normal(healpix4_ring.n)
            assert f @ (lap @ f) >= -1e-10 * (f @ f)

    def test_sparse_csv_round_trip(self, tmp_path):
        s = healpix_sampling(2)
        lap = laplacian(build_graph(s, 4, WeightScheme("inverse-distance")))
        path = tmp_path / "lap.csv"
        write_sparse_csv(lap, path)
        first = path.read_text().splitlines()[0]
        assert first == f"{s.n},{lap.nnz}"
        back = read_sparse_csv(path)
        assert (back != lap).nnz == 0


class TestHeuristicKernelWidth:
    def test_equal_distances(self, ico0):
        # all icosahedron edges have the same length d: t = d^2 / 2
        d = np.linalg.norm(ico0.points[0] - ico0.points[1])
        t = heuristic_kernel_width(ico0, 5)
        assert abs(t - d * d / 2.0) < 1e-14

    def test_direct_recomputation(self, healpix8_ring):
        k = 8
        t = heuristic_kernel_width(healpix8_ring, k)
        nb = knn_edges(healpix8_ring, k)
        total = 0.0
        for i in range(healpix8_ring.n):
            for j in nb[i]:
                total += np.sum((healpix8_ring.points[i] - healpix8_ring.points[j]) ** 2)
        expected = 0.5 * total / (healpix8_ring.n * k)
        assert abs(t - expected) < 1e-12

    def test_mean_distance_variant(self, healpix8_ring):
        t_hms = heuristic_kernel_width(healpix8_ring, 8, "half-mean-square")
        t_md = heuristic_kernel_width(healpix8_ring, 8, "mean-distance")
        assert t_md > t_hms > 0

    def test_unknown_kind(self, healpix8_ring):
        with pytest.raises(InvalidArgumentError):
            heuristic_kernel_width(healpix8_ring, 8, "median")


class TestLargestEigenvalue:
    def test_two_vertex_analytic(self):
        lam = largest_eigenvalue(laplacian(two_point_graph(0.7)))
        assert abs(lam - 1.4) <= 1.4 * 2e-6

    def test_dense_oracle(self):
        s = healpix_sampling(2)
        lap = laplacian(build_graph(s, 8, WeightScheme("gaussian", heuristic_kernel_width(s, 8))))
        lam = largest_eigenvalue(lap)
        dense = np.linalg.eigvalsh(lap.toarray()).max()
        assert abs(lam - dense) < 1e-5 * dense
        assert lam >= dense

    def test_zero_matrix(self):
        assert largest_eigenvalue(sp.csr_matrix((40, 40))) == 0.0


class TestGaussianGraphFamily:
    def test_matches_build_graph(self, healpix4_ring):
        fam = GaussianGraphFamily(healpix4_ring, 8)
        for t in (0.01, 0.05):
            a = fam.graph(t).adjacency
            b = build_graph(healpix4_ring, 8, WeightScheme("gaussian", t)).adjacency
            assert (a != b).nnz == 0
