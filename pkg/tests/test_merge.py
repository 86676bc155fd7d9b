import numpy as np
import pytest

from parsfm.engine import (
    Reconstruction,
    Track,
    mean_reprojection_error,
    validate_reconstruction,
)
from parsfm.geometry import SimilarityTransform
from parsfm.matchgraph import FeatureSet
from parsfm.merge import (
    CorrespondenceGraph,
    GcpRecord,
    MergeFailure,
    build_correspondence_graph,
    find_common_points,
    georeference,
    merge_all,
    merge_pair,
    ransac_similarity,
    read_gcps,
    strategy_match_counts,
    transform_pose,
    transform_residual,
    write_gcps,
)
from parsfm.merge.merging import MergeOptions

from helpers import make_scene, random_rotation


def gt_reconstruction(scene, images=None, recon_id=0):
    """Exact reconstruction straight from the generating configuration."""
    images = scene["images"] if images is None else list(images)
    recon = Reconstruction(recon_id=recon_id)
    for img in images:
        recon.cameras[img] = (scene["intrinsics"][img], scene["gt_poses"][img].copy())
    recon.registered_order = list(images)
    for k in range(len(scene["points"])):
        obs = sorted((img, k) for img in images)
        recon.points[k] = (scene["points"][k].copy(), Track(k, obs))
    return recon


def transform_recon(recon, T):
    out = recon.copy()
    for img, (intr, pose) in out.cameras.items():
        out.cameras[img] = (intr, transform_pose(pose, T))
    for pid, (xyz, track) in out.points.items():
        out.points[pid] = (T.apply(xyz).reshape(3), track)
    return out


def random_similarity(rng, scale_range=(0.5, 2.0)):
    return SimilarityTransform(
        float(rng.uniform(*scale_range)),
        random_rotation(rng),
        rng.uniform(-5, 5, 3),
    )


class TestCorrespondenceGraph:
    def test_no_cross_matches_empty(self):
        a = make_scene(n_cams=4, n_pts=30, seed=0)
        b = make_scene(n_cams=4, n_pts=30, seed=1, id_offset=10, offset=(100, 0, 0))
        src = gt_reconstruction(b)
        ref = gt_reconstruction(a)
        cg = build_correspondence_graph(src, ref, a["pairs"] + b["pairs"])
        assert cg.loaded_match_count == 0
        assert cg.mapping == {}

    def test_loads_only_cross_pairs(self):
        scene = make_scene(n_cams=8, n_pts=40, seed=2)
        src = gt_reconstruction(scene, images=[0, 1, 2, 3], recon_id=1)
        ref = gt_reconstruction(scene, images=[4, 5, 6, 7], recon_id=2)
        cg = build_correspondence_graph(src, ref, scene["pairs"])
        expect = sum(
            1
            for p in scene["pairs"]
            if (p.image_id_a in {0, 1, 2, 3}) != (p.image_id_b in {0, 1, 2, 3})
        )
        assert cg.loaded_match_count == expect
        for (img, _), targets in cg.mapping.items():
            assert img in {0, 1, 2, 3}
            assert all(t[0] in {4, 5, 6, 7} for t in targets)

    def test_strategy_count_ordering(self):
        scene = make_scene(n_cams=10, n_pts=40, seed=3)
        src = gt_reconstruction(scene, images=[0, 1, 2])
        ref = gt_reconstruction(scene, images=[3, 4, 5, 6])
        counts = strategy_match_counts(src, ref, scene["pairs"])
        assert counts["on_demand"] <= counts["pairwise"] <= counts["all_dataset"]
        assert counts["on_demand"] < counts["pairwise"]
        cg = build_correspondence_graph(src, ref, scene["pairs"])
        assert cg.loaded_match_count == counts["on_demand"]


class TestFindCommonPoints:
    def test_identity_pairs_every_point(self):
        scene = make_scene(n_cams=6, n_pts=30, seed=4)
        recon = gt_reconstruction(scene)
        cg = build_correspondence_graph(recon, recon, scene["pairs"])
        common = find_common_points(cg, recon, recon)
        assert sorted(common.pairs) == [(k, k) for k in range(30)]

    def test_overlapping_subsets(self):
        scene = make_scene(n_cams=12, n_pts=40, seed=5)
        src = gt_reconstruction(scene, images=range(6, 12))
        ref = gt_reconstruction(scene, images=range(0, 8))
        cg = build_correspondence_graph(src, ref, scene["pairs"])
        common = find_common_points(cg, src, ref)
        assert sorted(common.pairs) == [(k, k) for k in range(40)]

    def test_conflict_resolved_by_majority(self):
        src = Reconstruction()
        src.points[0] = (np.zeros(3), Track(0, [(0, 0), (1, 0)]))
        ref = Reconstruction()
        ref.points[10] = (np.zeros(3), Track(10, [(2, 0), (3, 0)]))
        ref.points[11] = (np.zeros(3), Track(11, [(2, 1), (3, 1)]))
        cg = CorrespondenceGraph(
            mapping={
                (0, 0): [(2, 0)],
                (1, 0): [(3, 0), (2, 1)],
            },
            loaded_match_count=3,
            source_images={0, 1},
        )
        common = find_common_points(cg, src, ref)
        assert common.pairs == [(0, 10)]  # 2 links vs 1
        assert common.support == [2]

    def test_tie_keeps_lower_reference_id(self):
        src = Reconstruction()
        src.points[0] = (np.zeros(3), Track(0, [(0, 0), (1, 0)]))
        ref = Reconstruction()
        ref.points[10] = (np.zeros(3), Track(10, [(2, 0)]))
        ref.points[11] = (np.zeros(3), Track(11, [(2, 1)]))
        cg = CorrespondenceGraph(mapping={(0, 0): [(2, 0)], (1, 0): [(2, 1)]})
        common = find_common_points(cg, src, ref)
        assert common.pairs == [(0, 10)]


class TestTransformResidual:
    def test_identity_equals_own_rms(self):
        scene = make_scene(n_cams=5, n_pts=20, seed=6)
        recon = gt_reconstruction(scene)
        rng = np.random.default_rng(7)
        noisy = {
            img: FeatureSet(
                img,
                np.hstack(
                    [
                        fs.keypoints[:, :2] + rng.normal(0, 0.5, (len(fs), 2)),
                        fs.keypoints[:, 2:],
                    ]
                ),
                fs.descriptors,
            )
            for img, fs in scene["features"].items()
        }
        T = SimilarityTransform.identity()
        for pid in [0, 5, 19]:
            r = transform_residual((pid, pid), T, recon, recon, noisy)
            errs = []
            for img, kp in recon.points[pid][1].observations:
                intr, pose = recon.cameras[img]
                from parsfm.geometry import project

                errs.append(
                    np.sum(
                        (
                            project(intr, pose, recon.points[pid][0])
                            - noisy[img].keypoints[kp, :2]
                        )
                        ** 2
                    )
                )
            expect = float(np.sqrt(np.mean(errs)))
            assert abs(r - expect) < 1e-9

    def test_generating_transform_near_zero(self):
        scene = make_scene(n_cams=6, n_pts=30, seed=8)
        src = gt_reconstruction(scene)
        T = random_similarity(np.random.default_rng(9))
        ref = transform_recon(src, T)
        for pid in range(0, 30, 5):
            r = transform_residual((pid, pid), T, src, ref, scene["features"])
            assert r < 1e-9

    def test_wrong_scale_large(self):
        scene = make_scene(n_cams=6, n_pts=30, seed=10)
        src = gt_reconstruction(scene)
        T_true = SimilarityTransform(2.0, np.eye(3), np.zeros(3))
        ref = transform_recon(src, T_true)
        r = transform_residual((0, 0), SimilarityTransform.identity(), src, ref,
                               scene["features"])
        assert r > 10.0

    def test_symmetry_under_role_swap(self):
        scene = make_scene(n_cams=6, n_pts=30, seed=11)
        src = gt_reconstruction(scene)
        T = random_similarity(np.random.default_rng(12))
        ref = transform_recon(src, T)
        for pid in range(0, 30, 7):
            fwd = transform_residual((pid, pid), T, src, ref, scene["features"])
            bwd = transform_residual(
                (pid, pid), T.inverse(), ref, src, scene["features"]
            )
            assert abs(fwd - bwd) < 1e-9

    def test_behind_camera_infinite(self):
        scene = make_scene(n_cams=4, n_pts=20, seed=13)
        recon = gt_reconstruction(scene)
        # push the mapped point far behind every camera
        T = SimilarityTransform(1.0, np.eye(3), np.array([0.0, 0.0, 1e6]))
        r = transform_residual((0, 0), T, recon, recon, scene["features"])
        assert np.isinf(r)


class TestRansacSimilarity:
    def _aligned_pair(self, seed, n_pts=50):
        scene = make_scene(n_cams=6, n_pts=n_pts, seed=seed)
        src = gt_reconstruction(scene)
        T = random_similarity(np.random.default_rng(seed + 100))
        ref = transform_recon(src, T)
        cg = build_correspondence_graph(src, ref, scene["pairs"])
        common = find_common_points(cg, src, ref)
        return scene, src, ref, T, common

    def test_exact_recovery(self):
        scene, src, ref, T, common = self._aligned_pair(14)
        assert len(common) == 50
        Te, mask, mse = ransac_similarity(common, src, ref, scene["features"], rng=0)
        assert mask.all()
        assert abs(Te.scale - T.scale) < 1e-9
        assert np.allclose(Te.rotation, T.rotation, atol=1e-9)
        assert np.allclose(Te.translation, T.translation, atol=1e-8)
        assert mse < 1e-16

    def test_planted_outliers_classified(self):
        scene, src, ref, T, common = self._aligned_pair(15)
        rng = np.random.default_rng(16)
        n = len(common.pairs)
        bad = rng.choice(n, int(0.3 * n), replace=False)
        truth = np.ones(n, dtype=bool)
        for i in bad:
            s, r = common.pairs[i]
            # re-pair with a different reference point: a gross mismatch
            common.pairs[i] = (s, (r + 7) % n)
            truth[i] = False
        _, mask, _ = ransac_similarity(common, src, ref, scene["features"], rng=1)
        accuracy = float((mask == truth).mean())
        assert accuracy >= 0.95

    def test_too_few_pairs(self):
        scene, src, ref, T, common = self._aligned_pair(17)
        common.pairs = common.pairs[:2]
        common.support = common.support[:2]
        with pytest.raises(MergeFailure):
            ransac_similarity(common, src, ref, scene["features"], rng=0)


class TestMergePair:
    def test_self_merge_identity_idempotent(self):
        scene = make_scene(n_cams=5, n_pts=30, seed=18)
        recon = gt_reconstruction(scene)
        before_cams = dict(recon.cameras)
        before_obs = {
            pid: list(t.observations) for pid, (_, t) in recon.points.items()
        }
        merged = merge_pair(
            recon,
            recon.copy(),
            SimilarityTransform.identity(),
            [(k, k) for k in recon.points],
        )
        assert set(merged.cameras) == set(before_cams)
        assert set(merged.points) == set(before_obs)
        for pid, (_, t) in merged.points.items():
            assert t.observations == before_obs[pid]

    def test_two_half_scenes_fused(self):
        scene = make_scene(n_cams=10, n_pts=40, seed=19)
        left = gt_reconstruction(scene, images=range(0, 6))
        T = random_similarity(np.random.default_rng(20))
        right = transform_recon(
            gt_reconstruction(scene, images=range(4, 10)), T
        )
        merged = merge_pair(
            left, right, T.inverse(), [(k, k) for k in range(40)]
        )
        assert set(merged.cameras) == set(range(10))
        assert merged.num_points() == 40
        for pid, (_, t) in merged.points.items():
            assert {img for img, _ in t.observations} == set(range(10))
        validate_reconstruction(merged, scene["features"])
        assert mean_reprojection_error(merged, scene["features"]) < 1e-9


class TestMergeAll:
    def test_clusters_merge_into_skeleton(self):
        scene = make_scene(n_cams=12, n_pts=60, seed=21)
        rng = np.random.default_rng(22)
        skeleton = gt_reconstruction(scene, images=[0, 3, 6, 9], recon_id=0)
        clusters = [
            transform_recon(
                gt_reconstruction(scene, images=r, recon_id=i + 1),
                random_similarity(rng),
            )
            for i, r in enumerate([range(0, 4), range(4, 8), range(8, 12)])
        ]
        merged, report = merge_all(
            skeleton, clusters, scene["features"], scene["pairs"]
        )
        assert set(merged.cameras) == set(range(12))
        assert not report.dropped
        assert len(report.steps) == 3
        # every cluster point was common with the skeleton: nothing new
        assert merged.num_points() == 60
        assert report.error_after_final_ba <= report.error_before_final_ba + 1e-12
        assert report.error_after_final_ba < 1e-6
        validate_reconstruction(merged, scene["features"])
        for step in report.steps:
            c = step.loaded_match_counts
            assert c["on_demand"] <= c["pairwise"] <= c["all_dataset"]

    def test_unconnected_cluster_dropped(self):
        scene = make_scene(n_cams=8, n_pts=40, seed=23)
        far = make_scene(
            n_cams=4, n_pts=30, seed=24, id_offset=20, offset=(500, 0, 0)
        )
        skeleton = gt_reconstruction(scene, images=range(0, 4))
        good = gt_reconstruction(scene, images=range(3, 8), recon_id=1)
        lost = gt_reconstruction(far, recon_id=2)
        features = {**scene["features"], **far["features"]}
        merged, report = merge_all(
            skeleton,
            [good, lost],
            features,
            scene["pairs"] + far["pairs"],
        )
        assert report.dropped == [1]  # cluster index of `lost`
        assert set(merged.cameras) == set(range(8))

    def test_merge_order_by_common_count(self):
        scene = make_scene(n_cams=12, n_pts=60, seed=25)
        skeleton = gt_reconstruction(scene, images=range(0, 4))
        # cluster 0 overlaps the skeleton heavily, cluster 1 barely
        big = gt_reconstruction(scene, images=range(2, 8), recon_id=1)
        small = gt_reconstruction(scene, images=range(7, 12), recon_id=2)
        merged, report = merge_all(
            skeleton, [big, small], scene["features"], scene["pairs"]
        )
        assert [s.cluster_index for s in report.steps] == [0, 1]
        assert set(merged.cameras) == set(range(12))


class TestGeoreference:
    def _geo_setup(self, seed=26, noise=0.0):
        scene = make_scene(n_cams=8, n_pts=60, seed=seed, noise=noise)
        rng = np.random.default_rng(seed + 1)
        # model lives in an arbitrary frame; survey frame is another one
        model = transform_recon(gt_reconstruction(scene), random_similarity(rng))
        survey = random_similarity(rng, scale_range=(1.5, 2.5))
        gcps = []
        for j, k in enumerate(range(0, 30, 3)):
            world = survey.apply(scene["points"][k]).reshape(3)
            obs = [
                (img, scene["features"][img].keypoints[k, :2].copy())
                for img in scene["images"][:5]
            ]
            role = "control" if j < 3 else "check"
            gcps.append(GcpRecord(j, world, obs, role))
        return scene, model, gcps, survey

    def test_noiseless_check_residuals_vanish(self):
        scene, model, gcps, survey = self._geo_setup()
        geo, report = georeference(model, gcps, scene["features"])
        assert len(report.residuals) == 7
        for _, dx, dy, dz in report.residuals:
            assert max(dx, dy, dz) < 1e-9
        # scene points land on their surveyed positions too
        for k in range(60):
            expect = survey.apply(scene["points"][k]).reshape(3)
            assert np.allclose(geo.points[k][0], expect, atol=1e-6)

    def test_too_few_controls(self):
        scene, model, gcps, _ = self._geo_setup(seed=28)
        gcps = [g for g in gcps if g.role == "check"] + [
            g for g in gcps if g.role == "control"
        ][:2]
        with pytest.raises(ValueError):
            georeference(model, gcps, scene["features"])

    def test_residual_table_layout(self):
        scene, model, gcps, _ = self._geo_setup(seed=29)
        _, report = georeference(model, gcps, scene["features"])
        table = report.format_table()
        lines = table.splitlines()
        assert "|X| (m)" in lines[0] and "|Z| (m)" in lines[0]
        assert lines[-3].lstrip().startswith("Max")
        assert lines[-2].lstrip().startswith("Mean")
        assert lines[-1].lstrip().startswith("Std")
        for name in ("max", "mean", "std"):
            assert report.stats[name].shape == (3,)

    def test_gcp_file_round_trip(self, tmp_path):
        _, _, gcps, _ = self._geo_setup(seed=30)
        path = tmp_path / "gcps.txt"
        write_gcps(path, gcps)
        back = read_gcps(path)
        assert len(back) == len(gcps)
        for g0, g1 in zip(gcps, back):
            assert g0.gcp_id == g1.gcp_id
            assert g0.role == g1.role
            assert np.array_equal(g0.world, g1.world)
            assert len(g0.observations) == len(g1.observations)
            for (i0, p0), (i1, p1) in zip(g0.observations, g1.observations):
                assert i0 == i1
                assert np.array_equal(np.asarray(p0, dtype=float), p1)
