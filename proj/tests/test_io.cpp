#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "beamsplit/dataset.hpp"
#include "beamsplit/errors.hpp"
#include "beamsplit/image_io.hpp"
#include "beamsplit/ply.hpp"
#include "support/test_scenes.hpp"

using namespace beamsplit;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

Image random_float_image(std::mt19937_64& rng, int w, int h, int c) {
  // Values representable as float32 so PFM round trips are exact.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(w, h, c);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = static_cast<float>(u(rng));
  }
  return img;
}

}  // namespace

TEST_CASE("PFM write/read/write is byte-identical") {
  std::mt19937_64 rng(41);
  for (int ch : {1, 3}) {
    const Image img = random_float_image(rng, 13, 9, ch);
    const std::string p1 = "/tmp/beamsplit_io_a.pfm";
    const std::string p2 = "/tmp/beamsplit_io_b.pfm";
    write_pfm(p1, img);
    const Image back = read_pfm(p1);
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(back[i] == img[i]);
    write_pfm(p2, back);
    CHECK(read_bytes(p1) == read_bytes(p2));
  }
}

TEST_CASE("PFM rejects malformed input") {
  const std::string path = "/tmp/beamsplit_io_bad.pfm";
  std::ofstream(path, std::ios::binary) << "P6 not a pfm";
  CHECK_THROWS_AS(read_pfm(path), data_error);
  CHECK_THROWS_AS(read_pfm("/tmp/definitely_missing_123.pfm"), data_error);
  CHECK_THROWS_AS(write_pfm("/tmp/x.pfm", Image(2, 2, 2)),
                  invalid_parameter_error);
}

TEST_CASE("point PLY round trip: colors bit-exact, files idempotent") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointSet points;
  for (int i = 0; i < 40; ++i) {
    points.positions.emplace_back(u(rng) * 4 - 2, u(rng) * 4 - 2, u(rng) * 4);
    points.colors.emplace_back(u(rng), u(rng), u(rng));
  }
  const std::string p1 = "/tmp/beamsplit_pts_a.ply";
  const std::string p2 = "/tmp/beamsplit_pts_b.ply";
  write_points_ply(p1, points);
  const PointSet back = read_points_ply(p1);
  REQUIRE(back.size() == points.size());
  write_points_ply(p2, back);
  CHECK(read_bytes(p1) == read_bytes(p2));
  // Colors survive the 8-bit display-gamma quantization deterministically:
  // a second round trip is exact.
  const PointSet back2 = read_points_ply(p2);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back2.colors[i] == back.colors[i]);
    CHECK((back.positions[i] - points.positions[i]).norm() < 1e-6);
  }
}

TEST_CASE("cloud PLY round trip is exact for doubles") {
  std::mt19937_64 rng(43);
  CameraView view = testing::make_test_view();
  const GaussianCloud cloud = testing::make_random_cloud(rng, 17, 3, 1, view);
  const std::string p1 = "/tmp/beamsplit_cloud_a.ply";
  const std::string p2 = "/tmp/beamsplit_cloud_b.ply";
  write_cloud_ply(p1, cloud);
  const GaussianCloud back = read_cloud_ply(p1);
  REQUIRE(back.size() == cloud.size());
  CHECK(back.channels == cloud.channels);
  CHECK(back.sh_degree == cloud.sh_degree);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(back.gaussians[i].position == cloud.gaussians[i].position);
    CHECK(back.gaussians[i].rotation == cloud.gaussians[i].rotation);
    CHECK(back.gaussians[i].log_scale == cloud.gaussians[i].log_scale);
    CHECK(back.gaussians[i].opacity_logit == cloud.gaussians[i].opacity_logit);
    CHECK(back.gaussians[i].sh.coeffs == cloud.gaussians[i].sh.coeffs);
  }
  write_cloud_ply(p2, back);
  CHECK(read_bytes(p1) == read_bytes(p2));
}

TEST_CASE("PNG previews are written with the PNG magic") {
  Image img(8, 6, 3);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = (i % 7) / 7.0;
  const std::string path = "/tmp/beamsplit_preview.png";
  write_png_preview(path, img);
  const std::string bytes = read_bytes(path);
  REQUIRE(bytes.size() > 8);
  CHECK(static_cast<unsigned char>(bytes[0]) == 0x89);
  CHECK(bytes.substr(1, 3) == "PNG");
}

TEST_CASE("dataset save/load round trip") {
  SynthSpec spec;
  spec.seed = 77;
  spec.width = 24;
  spec.height = 18;
  spec.n_flash = 2;
  spec.n_noflash = 2;
  spec.n_holdout = 1;
  spec.points_per_plane = 50;
  const SynthDataset ds = emit_dataset(spec);
  const std::string dir = "/tmp/beamsplit_dataset_roundtrip";
  fs::remove_all(dir);
  save_dataset(dir, ds);

  const LoadedDataset back = load_dataset(dir);
  CHECK(back.spec.seed == spec.seed);
  CHECK(back.captures.views.size() == ds.captures.views.size());
  CHECK(back.has_gt());
  CHECK(back.has_points());
  REQUIRE(back.flash_labels.size() == ds.flash_labels.size());
  for (std::size_t v = 0; v < ds.captures.views.size(); ++v) {
    const CameraView& a = ds.captures.views[v];
    const CameraView& b = back.captures.views[v];
    CHECK(a.view_id == b.view_id);
    CHECK(a.flash == b.flash);
    CHECK(a.holdout == b.holdout);
    // Images pass through float32; compare at that precision.
    for (std::size_t i = 0; i < a.image.size(); ++i) {
      CHECK(static_cast<float>(a.image[i]) ==
            doctest::Approx(b.image[i]).epsilon(1e-7));
    }
  }
  for (std::size_t i = 0; i < ds.flash_labels.size(); ++i) {
    CHECK(ds.flash_labels[i] == back.flash_labels[i]);
  }
  CHECK_THROWS_AS(load_dataset("/tmp/beamsplit_missing_dataset"), data_error);
}
