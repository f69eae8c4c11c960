#include "lca/data_io.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lca;
using namespace lca::io;

namespace {

const std::filesystem::path kSourceDir = LCA_SOURCE_DIR;

std::vector<std::uint8_t> idx_bytes(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                    const std::vector<std::uint8_t>& pixels, std::uint32_t magic = 0x803) {
  std::vector<std::uint8_t> out;
  for (std::uint32_t v : {magic, count, rows, cols}) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

MetricsRow sample_row(std::int64_t image) {
  MetricsRow r;
  r.model = "two-layer-fixed";
  r.lambda = 0.5;
  r.lambda_e = 0.0078125;
  r.tau = 1.0 / 128;
  r.steps = 256;
  r.image_index = image;
  r.mse = 0.1 + 1e-17 * static_cast<double>(image);
  r.sparsity_fraction = 2.0 / 3.0;
  r.active_count = 11;
  r.v1_spikes = 1234;
  r.residual_spikes = 56789;
  r.synops = 1LL << 40;
  r.wall_ns = 0;
  r.saturation_events = 0;
  return r;
}

}  // namespace

TEST_CASE("golden IDX fixture") {
  const ImageSet set = load_idx_images(kSourceDir / "tests/fixtures/tiny3.idx3");
  REQUIRE(set.count() == 3);
  CHECK(set.rows == 2);
  CHECK(set.cols == 3);
  CHECK(set.pixels() == 6);
  const std::vector<std::vector<int>> expected = {
      {0, 255, 128, 1, 254, 51}, {10, 20, 30, 40, 50, 60}, {255, 255, 255, 0, 0, 0}};
  for (std::size_t k = 0; k < 3; ++k) {
    for (Eigen::Index i = 0; i < 6; ++i) {
      CHECK(set.images[k](i) == static_cast<double>(expected[k][static_cast<std::size_t>(i)]) / 255.0);
    }
  }
  CHECK(set.images[0](1) == 1.0);
  CHECK(set.images[0](0) == 0.0);
  CHECK(set.images[0](5) == 0.2);

  const ImageSet first = load_idx_images(kSourceDir / "tests/fixtures/tiny3.idx3", 2);
  CHECK(first.count() == 2);
  CHECK(first.images[1] == set.images[1]);
  CHECK(load_idx_images(kSourceDir / "tests/fixtures/tiny3.idx3", 99).count() == 3);
}

TEST_CASE("bundled MNIST subset") {
  const ImageSet set = load_idx_images(kSourceDir / "data/mnist_subset.idx3");
  CHECK(set.count() == 100);
  CHECK(set.rows == 28);
  CHECK(set.cols == 28);
  for (const auto& img : set.images) {
    REQUIRE(img.minCoeff() >= 0.0);
    REQUIRE(img.maxCoeff() <= 1.0);
  }
}

TEST_CASE("IDX errors") {
  const std::vector<std::uint8_t> px(12, 7);
  CHECK_NOTHROW(parse_idx_images(idx_bytes(2, 2, 3, px)));
  CHECK_THROWS_AS(parse_idx_images(idx_bytes(2, 2, 3, px, 0x801)), FormatError);
  CHECK_THROWS_AS(parse_idx_images(std::vector<std::uint8_t>(10)), FormatError);
  CHECK_THROWS_AS(parse_idx_images(idx_bytes(2, 0, 3, {})), FormatError);

  const std::vector<std::uint8_t> short_px(11, 7);
  try {
    parse_idx_images(idx_bytes(2, 2, 3, short_px));
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected 28") != std::string::npos);
    CHECK(msg.find("got 27") != std::string::npos);
  }
  CHECK_THROWS_AS(load_idx_images(kSourceDir / "tests/fixtures/does-not-exist.idx3"), std::runtime_error);
}

TEST_CASE("check_image_dims") {
  const ImageSet set = parse_idx_images(idx_bytes(1, 2, 3, std::vector<std::uint8_t>(6)));
  std::ostringstream warn;
  CHECK_NOTHROW(check_image_dims(set, 6, &warn));
  CHECK(warn.str().find("2x3") != std::string::npos);
  CHECK_THROWS_AS(check_image_dims(set, 784), std::invalid_argument);

  const ImageSet mnist = parse_idx_images(idx_bytes(1, 28, 28, std::vector<std::uint8_t>(784)));
  std::ostringstream quiet;
  check_image_dims(mnist, 784, &quiet);
  CHECK(quiet.str().empty());
}

TEST_CASE("compute_metrics") {
  const Dictionary d(Eigen::MatrixXd::Identity(4, 4));
  const Eigen::Vector4d x(1.0, 0.5, 0.0, 0.25);
  RunLabel label{"one-layer-float", 0.5, 0.0, 1.0 / 128, 256, 7};
  const ActivityCounters counters{10, 20, 30, 40};

  const MetricsRow zero = compute_metrics(label, x, d, Eigen::Vector4d::Zero(), counters, 99);
  CHECK(zero.sparsity_fraction == 1.0);
  CHECK(zero.active_count == 0);
  CHECK(zero.mse == doctest::Approx(x.squaredNorm() / 4));
  CHECK(zero.model == "one-layer-float");
  CHECK(zero.image_index == 7);
  CHECK(zero.v1_spikes == 10);
  CHECK(zero.residual_spikes == 20);
  CHECK(zero.synops == 30);
  CHECK(zero.saturation_events == 40);
  CHECK(zero.wall_ns == 99);

  const MetricsRow exact = compute_metrics(label, x, d, x, counters, 0);
  CHECK(exact.mse == 0.0);
  CHECK(exact.active_count == 3);
  CHECK(exact.sparsity_fraction == 0.25);

  const Dictionary big(Eigen::MatrixXd::Identity(784, 784));
  Eigen::VectorXd a = Eigen::VectorXd::Zero(784);
  a.head(133).setConstant(0.1);
  const MetricsRow m = compute_metrics(label, Eigen::VectorXd::Zero(784), big, a, {}, 0);
  CHECK(m.active_count == 133);
  CHECK(m.sparsity_fraction == doctest::Approx(651.0 / 784.0));

  CHECK_THROWS_AS(compute_metrics(label, x, d, Eigen::Vector3d::Zero(), counters, 0), std::invalid_argument);
}

TEST_CASE("CSV") {
  SUBCASE("empty run is header only") {
    CHECK(format_csv({}) == std::string(kCsvHeader) + "\n");
    CHECK(parse_csv(format_csv({})).empty());
  }
  SUBCASE("round trip is exact and column count fixed") {
    const std::vector<MetricsRow> rows = {sample_row(0), sample_row(1), sample_row(2)};
    const std::string text = format_csv(rows);
    CHECK(parse_csv(text) == rows);
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      CHECK(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) == kCsvColumns - 1);
    }
    CHECK(format_csv(rows) == text);
  }
  SUBCASE("shortest real formatting") {
    CHECK(format_real(0.5) == "0.5");
    CHECK(format_real(1.0 / 128) == "0.0078125");
    CHECK(format_real(0.0) == "0");
    CHECK(std::stod(format_real(0.1 + 0.2)) == 0.1 + 0.2);
  }
  SUBCASE("malformed input") {
    CHECK_THROWS_AS(parse_csv("nope\n"), FormatError);
    CHECK_THROWS_AS(parse_csv(std::string(kCsvHeader) + "\na,b\n"), FormatError);
    std::string bad = format_csv(std::vector<MetricsRow>{sample_row(0)});
    bad.replace(bad.find("256"), 3, "2x6");
    CHECK_THROWS_AS(parse_csv(bad), FormatError);
    MetricsRow r = sample_row(0);
    r.model = "a,b";
    CHECK_THROWS_AS(format_csv(std::vector<MetricsRow>{r}), std::invalid_argument);
  }
  SUBCASE("write_csv writes the formatted bytes") {
    const auto path = std::filesystem::temp_directory_path() / "lca_test_data_io.csv";
    const std::vector<MetricsRow> rows = {sample_row(4)};
    write_csv(rows, path);
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == format_csv(rows));
    std::filesystem::remove(path);
  }
}
