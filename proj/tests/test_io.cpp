#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "evasplat/io/bundle.hpp"
#include "evasplat/io/gaussian_io.hpp"
#include "evasplat/io/image_io.hpp"
#include "evasplat/metrics.hpp"
#include "testing.hpp"

using namespace evasplat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("evasplat_test_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("pfm round trip preserves depth bits") {
    TempDir tmp;
    Rng rng(61);
    DepthMap depth(20, 30);
    for (std::size_t i = 0; i < depth.values.size(); ++i) {
        if (rng.uniform() < 0.3) continue;
        depth.values[i] = static_cast<float>(rng.uniform(0.5, 9.0));
        depth.mask[i] = 1;
    }
    io::write_pfm(tmp.path / "d.pfm", depth);
    const DepthMap back = io::read_pfm(tmp.path / "d.pfm");
    CHECK(back.width == 30);
    CHECK(back.height == 20);
    CHECK(back.values == depth.values);  // bitwise
    // without a mask png, positivity implies the mask
    for (std::size_t i = 0; i < depth.mask.size(); ++i)
        CHECK(back.mask[i] == (depth.values[i] > 0 ? 1 : 0));
}

TEST_CASE("mask png carries soft alpha and the binary mask") {
    TempDir tmp;
    Rng rng(62);
    DepthMap depth(16, 16);
    Image alpha(16, 16, 1);
    for (std::size_t i = 0; i < depth.mask.size(); ++i) {
        const double a = rng.uniform();
        if (a < 0.4) continue;
        depth.mask[i] = 1;
        depth.values[i] = 1.0f;
        alpha.data[i] = static_cast<float>(a);
    }
    io::write_mask_png(tmp.path / "m.png", depth, alpha);

    DepthMap loaded = depth;
    std::fill(loaded.mask.begin(), loaded.mask.end(), 0);
    Image alpha_back;
    io::read_mask_png(tmp.path / "m.png", loaded, &alpha_back);
    for (std::size_t i = 0; i < depth.mask.size(); ++i) {
        CHECK(loaded.mask[i] == depth.mask[i]);
        if (depth.mask[i])
            CHECK(std::abs(alpha_back.data[i] - alpha.data[i]) <= 0.5f / 255.0f + 1e-6f);
        else
            CHECK(alpha_back.data[i] == 0.0f);
    }
}

TEST_CASE("png color round trip stays within 8-bit srgb quantization") {
    TempDir tmp;
    Rng rng(63);
    Image img(24, 18, 3);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    io::write_png(tmp.path / "c.png", img);
    const Image back = io::read_png(tmp.path / "c.png");
    REQUIRE(back.same_shape(img));
    // srgb quantization error, expressed in linear space, is largest at the
    // dark end; half an 8-bit step through the inverse transfer stays < 5e-3
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) < 5e-3f);
    CHECK(psnr(back, img) > 45.0);
}

TEST_CASE("evfp feature plane round trip is bitwise") {
    TempDir tmp;
    Rng rng(64);
    Image plane(7, 9, kFeatureDim);
    for (auto& v : plane.data) v = static_cast<float>(rng.uniform(-4.0, 4.0));
    io::write_feature_plane(tmp.path / "f.evfp", plane);
    const Image back = io::read_feature_plane(tmp.path / "f.evfp");
    CHECK(back.height == 7);
    CHECK(back.width == 9);
    CHECK(back.channels == kFeatureDim);
    CHECK(back.data == plane.data);

    // magic check
    std::ofstream bad(tmp.path / "bad.evfp", std::ios::binary);
    bad << "NOPExxxxxxxxxxxxxxxx";
    bad.close();
    CHECK_THROWS_AS(io::read_feature_plane(tmp.path / "bad.evfp"), Error);
}

TEST_CASE("evgs round trip is bitwise and rejects corrupt payloads") {
    TempDir tmp;
    Rng rng(65);
    const GaussianSet set = testing::random_set(rng, 37);
    io::write_gaussians(tmp.path / "g.evgs", set);
    const GaussianSet back = io::read_gaussians(tmp.path / "g.evgs");
    CHECK(back.size() == 37);
    CHECK(back.positions == set.positions);
    CHECK(back.opacities == set.opacities);
    CHECK(back.scales == set.scales);
    CHECK(back.quaternions == set.quaternions);
    CHECK(back.colors == set.colors);
    CHECK(back.features == set.features);

    // truncated file
    std::string data;
    {
        std::ifstream in(tmp.path / "g.evgs", std::ios::binary);
        data.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    std::ofstream out(tmp.path / "trunc.evgs", std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size() / 2));
    out.close();
    CHECK_THROWS_AS(io::read_gaussians(tmp.path / "trunc.evgs"), Error);
}

TEST_CASE("gaussian json export round trips small sets and refuses large ones") {
    TempDir tmp;
    Rng rng(66);
    const GaussianSet set = testing::random_set(rng, 5);
    io::write_gaussians_json(tmp.path / "g.json", set);
    const GaussianSet back = io::read_gaussians_json(tmp.path / "g.json");
    CHECK(back.positions == set.positions);
    CHECK(back.features == set.features);

    GaussianSet big(10000);
    CHECK_THROWS_AS(io::write_gaussians_json(tmp.path / "big.json", big), Error);
}

TEST_CASE("camera json round trip") {
    TempDir tmp;
    Rng rng(67);
    const CameraModel cam(123.5, 110.25, 31.5, 29.75, 64, 60, testing::random_pose(rng, 1.5));
    io::write_camera(tmp.path / "cam.json", cam);
    const CameraModel back = io::read_camera(tmp.path / "cam.json");
    CHECK(back.fx() == cam.fx());
    CHECK(back.fy() == cam.fy());
    CHECK(back.width() == cam.width());
    CHECK((back.world_to_camera().rotation - cam.world_to_camera().rotation)
              .cwiseAbs()
              .maxCoeff() < 1e-15);
    CHECK((back.world_to_camera().translation - cam.world_to_camera().translation)
              .cwiseAbs()
              .maxCoeff() < 1e-15);
}

TEST_CASE("scene bundle round trip") {
    TempDir tmp;
    SceneConfig cfg;
    cfg.seed = 17;
    cfg.n_views = 2;
    cfg.image_size = 32;
    cfg.n_gaussians = 20;
    const SyntheticScene scene = generate_scene(cfg);
    io::write_bundle(tmp.path / "bundle", scene);

    const io::SceneBundle bundle = io::read_bundle(tmp.path / "bundle");
    REQUIRE(bundle.cameras.size() == 2);
    CHECK(bundle.depths[0].values == scene.depths[0].values);
    CHECK(bundle.depths[0].mask == scene.depths[0].mask);
    CHECK(bundle.landmarks.items.size() == scene.landmarks.items.size());
    REQUIRE(bundle.ground_truth.has_value());
    CHECK(bundle.ground_truth->positions == scene.ground_truth.positions);
    // images pass through 8-bit srgb
    CHECK(psnr(bundle.images[0], scene.images[0]) > 45.0);

    CHECK_THROWS_WITH_AS(io::read_bundle(tmp.path / "missing"),
                         doctest::Contains("BundleNotFound"), Error);
}

TEST_CASE("atomic write leaves no temp file behind") {
    TempDir tmp;
    io::atomic_write(tmp.path / "x" / "y.txt", "payload");
    CHECK(fs::exists(tmp.path / "x" / "y.txt"));
    CHECK_FALSE(fs::exists(tmp.path / "x" / "y.txt.tmp"));
    std::ifstream in(tmp.path / "x" / "y.txt");
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(s == "payload");
}
