#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evasplat/camera.hpp"
#include "testing.hpp"

using namespace evasplat;
using testing::identity_camera;

TEST_CASE("project: principal-point ray") {
    const CameraModel cam = identity_camera();
    const PixelPoint p = project(cam, {0.0, 0.0, 2.0});
    CHECK(p.u == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(p.v == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(p.depth == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("project: off-axis analytic value") {
    const CameraModel cam = identity_camera();
    const PixelPoint p = project(cam, {0.5, 0.0, 1.0});
    CHECK(p.u == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(p.v == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(p.depth == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("project: rejects points behind the camera") {
    const CameraModel cam = identity_camera();
    CHECK_THROWS_WITH_AS(project(cam, {0.0, 0.0, -1.0}), doctest::Contains("PointBehindCamera"),
                         Error);
    CHECK_THROWS_AS(project(cam, {0.0, 0.0, 0.0}), Error);
}

TEST_CASE("unproject: trivial rays and errors") {
    const CameraModel cam = identity_camera();
    const Eigen::Vector3d p = unproject(cam, 50.0, 50.0, 3.0);
    CHECK((p - Eigen::Vector3d(0, 0, 3)).norm() < 1e-12);

    const Eigen::Vector3d q = unproject(cam, 150.0, 50.0, 1.0);
    CHECK((q - Eigen::Vector3d(1, 0, 1)).norm() < 1e-12);

    CHECK_THROWS_WITH_AS(unproject(cam, 10.0, 10.0, 0.0), doctest::Contains("NonPositiveDepth"),
                         Error);
}

TEST_CASE("round trip over random poses and points") {
    Rng rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        const CameraModel cam(80.0 + rng.uniform(0.0, 60.0), 80.0 + rng.uniform(0.0, 60.0),
                              40.0 + rng.uniform(0.0, 20.0), 40.0 + rng.uniform(0.0, 20.0), 100,
                              100, testing::random_pose(rng, 2.0));
        // point guaranteed in front: build from a pixel and a depth
        const double u = rng.uniform(0.0, 100.0);
        const double v = rng.uniform(0.0, 100.0);
        const double d = rng.uniform(0.1, 10.0);
        const Eigen::Vector3d world = unproject(cam, u, v, d);
        const PixelPoint p = project(cam, world);
        CHECK(std::abs(p.u - u) < 1e-9);
        CHECK(std::abs(p.v - v) < 1e-9);
        CHECK(std::abs(p.depth - d) < 1e-9);
    }
}

TEST_CASE("pose consistency: transform then identity-project") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const RigidTransform pose = testing::random_pose(rng, 1.0);
        const CameraModel cam(120.0, 110.0, 50.0, 48.0, 100, 100, pose);
        const CameraModel cam_id(120.0, 110.0, 50.0, 48.0, 100, 100, RigidTransform{});

        const Eigen::Vector3d world = unproject(cam, rng.uniform(0, 100), rng.uniform(0, 100),
                                                rng.uniform(0.5, 5.0));
        const PixelPoint direct = project(cam, world);
        const PixelPoint via = project(cam_id, pose.apply(world));
        CHECK(std::abs(direct.u - via.u) < 1e-9);
        CHECK(std::abs(direct.v - via.v) < 1e-9);
        CHECK(std::abs(direct.depth - via.depth) < 1e-9);
    }
}

TEST_CASE("two-view unprojection consistency with analytic depth") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const CameraModel cam_a(100, 100, 50, 50, 100, 100, testing::random_pose(rng, 1.5));
        const CameraModel cam_b(90, 95, 50, 50, 100, 100, testing::random_pose(rng, 1.5));
        const Eigen::Vector3d world(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));

        Eigen::Vector3d pa, pb;
        try {
            const PixelPoint a = project(cam_a, world);
            const PixelPoint b = project(cam_b, world);
            pa = unproject(cam_a, a.u, a.v, a.depth);
            pb = unproject(cam_b, b.u, b.v, b.depth);
        } catch (const Error&) {
            continue;  // behind one of the random cameras
        }
        CHECK((pa - pb).norm() < 1e-6);
        CHECK((pa - world).norm() < 1e-9);
    }
}

TEST_CASE("camera validation rejects bad intrinsics and poses") {
    CHECK_THROWS_AS(CameraModel(-1, 100, 50, 50, 100, 100, RigidTransform{}), Error);
    CHECK_THROWS_AS(CameraModel(100, 100, 150, 50, 100, 100, RigidTransform{}), Error);
    RigidTransform skewed;
    skewed.rotation(0, 1) = 0.5;
    CHECK_THROWS_AS(CameraModel(100, 100, 50, 50, 100, 100, skewed), Error);
    RigidTransform mirrored;
    mirrored.rotation = -Eigen::Matrix3d::Identity();
    CHECK_THROWS_AS(CameraModel(100, 100, 50, 50, 100, 100, mirrored), Error);
}

TEST_CASE("depth_to_positions: constant plane and single pixel") {
    const CameraModel cam = identity_camera(100.0, 50.0, 100);

    DepthMap depth(100, 100);
    for (auto& v : depth.values) v = 2.0f;
    for (auto& m : depth.mask) m = 1;
    const PositionMap pm = depth_to_positions(cam, depth);
    for (int y = 0; y < 100; y += 17)
        for (int x = 0; x < 100; x += 13) CHECK(pm.at(y, x).z() == doctest::Approx(2.0));

    DepthMap single(100, 100);
    // pixel (49, 49) has center (49.5, 49.5); use the principal-point pixel
    single.values[50 * 100 + 50] = 1.0f;
    single.mask[50 * 100 + 50] = 1;
    const PositionMap one = depth_to_positions(cam, single);
    CHECK(one.in(50, 50));
    // center (50.5, 50.5) sits half a pixel off the principal point
    const Eigen::Vector3d expect = unproject(cam, 50.5, 50.5, 1.0);
    CHECK((one.at(50, 50) - expect).norm() == 0.0);
}

TEST_CASE("depth_to_positions equals the scalar unproject loop bitwise") {
    Rng rng(3);
    const CameraModel cam(77.0, 83.0, 31.0, 29.0, 64, 60, testing::random_pose(rng, 1.0));
    DepthMap depth(60, 64);
    for (std::size_t i = 0; i < depth.values.size(); ++i) {
        if (rng.uniform() < 0.35) continue;
        depth.values[i] = static_cast<float>(rng.uniform(0.5, 6.0));
        depth.mask[i] = 1;
    }

    const PositionMap pm = depth_to_positions(cam, depth);
    for (int y = 0; y < 60; ++y) {
        for (int x = 0; x < 64; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * 64 + x;
            CHECK(pm.mask[i] == depth.mask[i]);  // mask preserved exactly
            if (!depth.mask[i]) continue;
            const Eigen::Vector3d oracle = unproject(cam, x + 0.5, y + 0.5, depth.values[i]);
            CHECK(pm.positions[i].x() == oracle.x());
            CHECK(pm.positions[i].y() == oracle.y());
            CHECK(pm.positions[i].z() == oracle.z());
        }
    }
}

TEST_CASE("depth_to_positions rejects mismatched dimensions and bad depths") {
    const CameraModel cam = identity_camera(100.0, 50.0, 100);
    DepthMap wrong(32, 32);
    CHECK_THROWS_WITH_AS(depth_to_positions(cam, wrong), doctest::Contains("DimensionMismatch"),
                         Error);

    DepthMap bad(100, 100);
    bad.mask[0] = 1;
    bad.values[0] = -1.0f;
    CHECK_THROWS_AS(depth_to_positions(cam, bad), Error);
}
