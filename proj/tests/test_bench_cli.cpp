#include "lca/bench.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace lca;
using namespace lca::bench;

namespace {

namespace fs = std::filesystem;

const fs::path kSourceDir = LCA_SOURCE_DIR;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Scratch directory holding a small 784 x 64 dictionary.
struct Workspace {
  fs::path dir;
  fs::path dict;
  std::string images = (kSourceDir / "data/mnist_subset.idx3").string();

  Workspace() {
    dir = fs::temp_directory_path() / "lca_test_bench_cli";
    fs::create_directories(dir);
    dict = dir / "d64.lcad";
    save_dictionary(synth_dictionary(5, SynthMode::gaussian, 784, 64), dict);
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string out(const std::string& name) const { return (dir / name).string(); }
  std::vector<std::string> common(const std::string& out_name) const {
    return {"--dict", dict.string(), "--images", images, "--out", out(out_name), "--no-timing"};
  }
};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("model names") {
  for (Model m : {Model::one_layer_float, Model::one_layer_fixed, Model::two_layer_float, Model::two_layer_fixed}) {
    CHECK(parse_model(to_string(m)) == m);
  }
  CHECK(to_string(Model::two_layer_fixed) == "two-layer-fixed");
  CHECK(is_two_layer(Model::two_layer_float));
  CHECK_FALSE(is_two_layer(Model::one_layer_fixed));
  CHECK_THROWS_AS(parse_model("three-layer"), UsageError);
}

TEST_CASE("sweep spec") {
  SweepSpec s;
  s.models = {Model::one_layer_float, Model::two_layer_fixed};
  CHECK(s.grid().size() == 2 * 11);
  s.lambda_min_exp = s.lambda_max_exp = 0;
  s.lambda_e_min_exp = -2;
  s.lambda_e_max_exp = 2;
  const auto g = s.grid();
  // One-layer models have no residual threshold, so only one point each.
  CHECK(g.size() == 1 + 5);
  CHECK(g.front().model == Model::one_layer_float);
  CHECK(g.back().lambda_e_exp == 2);

  s.lambda_min_exp = 3;
  s.lambda_max_exp = 2;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s.lambda_min_exp = -17;
  s.lambda_max_exp = 0;
  CHECK_THROWS_AS(s.validate(), UsageError);
}

TEST_CASE("sample_images") {
  const auto a = sample_images(100, 10, 42);
  CHECK(a.size() == 10);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  CHECK(a.back() < 100);
  CHECK(sample_images(100, 10, 42) == a);
  CHECK(sample_images(100, 10, 43) != a);
  CHECK(sample_images(5, 5, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(sample_images(5, 6, 1), UsageError);
}

TEST_CASE("run subcommand") {
  Workspace ws;
  const auto r = cli(concat({"run", "--model", "two-layer-fixed", "--lambda-exp", "-1", "--lambda-e-exp", "-3"},
                            ws.common("run.csv")));
  REQUIRE(r.code == kExitOk);
  const auto rows = io::parse_csv(slurp(ws.out("run.csv")));
  REQUIRE(rows.size() == 10);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].image_index == static_cast<std::int64_t>(k));
    CHECK(rows[k].model == "two-layer-fixed");
    CHECK(rows[k].lambda == 0.5);
    CHECK(rows[k].lambda_e == 0.125);
    CHECK(rows[k].tau == 1.0 / 128);
    CHECK(rows[k].steps == 256);
    CHECK(rows[k].wall_ns == 0);
    CHECK(rows[k].residual_spikes > 0);
  }
  const std::string meta = slurp(ws.out("run.csv") + ".meta.json");
  CHECK(meta.find("\"pixel_scaling\": \"p/255\"") != std::string::npos);
  CHECK(meta.find("\"image_indices\"") != std::string::npos);

  SUBCASE("one-layer rows carry lambda_e = 0") {
    REQUIRE(cli(concat({"run", "--model", "one-layer-fixed", "--num-images", "2"}, ws.common("one.csv"))).code ==
            kExitOk);
    const auto one = io::parse_csv(slurp(ws.out("one.csv")));
    REQUIRE(one.size() == 2);
    CHECK(one[0].lambda_e == 0.0);
    CHECK(one[0].residual_spikes == 0);
    CHECK(one[0].synops == one[0].v1_spikes * 63);
  }
  SUBCASE("timing column is filled without --no-timing") {
    REQUIRE(cli({"run", "--model", "one-layer-float", "--num-images", "1", "--dict", ws.dict.string(), "--images",
                 ws.images, "--out", ws.out("t.csv")})
                .code == kExitOk);
    CHECK(io::parse_csv(slurp(ws.out("t.csv")))[0].wall_ns > 0);
  }
}

TEST_CASE("usage errors exit 2") {
  Workspace ws;
  CHECK(cli(concat({"run", "--model", "bogus"}, ws.common("x.csv"))).code == kExitUsage);
  CHECK(cli(concat({"run", "--model", "one-layer-float", "--steps", "0"}, ws.common("x.csv"))).code == kExitUsage);
  CHECK(cli(concat({"run", "--model", "one-layer-float", "--jobs", "0"}, ws.common("x.csv"))).code == kExitUsage);
  CHECK(cli(concat({"run", "--model", "one-layer-float", "--lambda-exp", "7"}, ws.common("x.csv"))).code ==
        kExitUsage);
  CHECK(cli(concat({"run", "--model", "one-layer-float", "--num-images", "101"}, ws.common("x.csv"))).code ==
        kExitUsage);
  CHECK(cli({"run", "--model", "one-layer-float"}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli(concat({"sweep-lambda-e", "--model", "one-layer-fixed"}, ws.common("x.csv"))).code == kExitUsage);
  CHECK(cli({"make-dict", "--n", "0", "--out", ws.out("d.lcad")}).code == kExitUsage);
  CHECK(cli({"make-dict", "--mode", "wavelet", "--out", ws.out("d.lcad")}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("runtime errors exit 1") {
  Workspace ws;
  const auto r = cli({"run", "--model", "one-layer-float", "--dict", ws.out("missing.lcad"), "--images", ws.images,
                      "--out", ws.out("x.csv")});
  CHECK(r.code == kExitRuntime);
  CHECK(r.err.find("missing.lcad") != std::string::npos);
  // Image/dictionary size mismatch.
  save_dictionary(synth_dictionary(1, SynthMode::gaussian, 100, 8), ws.dir / "small.lcad");
  CHECK(cli({"run", "--model", "one-layer-float", "--dict", (ws.dir / "small.lcad").string(), "--images", ws.images,
             "--out", ws.out("x.csv")})
            .code != kExitOk);
}

TEST_CASE("sweep-lambda") {
  Workspace ws;
  REQUIRE(cli(concat({"sweep-lambda"}, ws.common("sweep.csv"))).code == kExitOk);
  const auto rows = io::parse_csv(slurp(ws.out("sweep.csv")));
  CHECK(rows.size() == 2 * 11 * 10);

  // Mean active count never rises with lambda.
  std::map<std::pair<std::string, double>, double> mean;
  for (const auto& r : rows) mean[{r.model, r.lambda}] += static_cast<double>(r.active_count) / 10.0;
  for (const std::string model : {"one-layer-float", "one-layer-fixed"}) {
    double previous = 1e300;
    for (int e = -6; e <= 4; ++e) {
      const double m = mean.at({model, std::ldexp(1.0, e)});
      CHECK(m <= previous);
      previous = m;
    }
    CHECK(mean.at({model, 16.0}) == 0.0);
  }

  SUBCASE("single lambda") {
    REQUIRE(cli(concat({"sweep-lambda", "--model", "two-layer-float", "--lambda-min-exp", "0", "--lambda-max-exp",
                        "0", "--num-images", "3"},
                       ws.common("one.csv")))
                .code == kExitOk);
    const auto one = io::parse_csv(slurp(ws.out("one.csv")));
    REQUIRE(one.size() == 3);
    CHECK(one[0].lambda == 1.0);
    CHECK(one[0].lambda_e == 64.0);
  }
}

TEST_CASE("sweep-lambda-e") {
  Workspace ws;
  REQUIRE(cli(concat({"sweep-lambda-e"}, ws.common("e.csv"))).code == kExitOk);
  const auto rows = io::parse_csv(slurp(ws.out("e.csv")));
  REQUIRE(rows.size() == 23 * 3);
  CHECK(rows.front().lambda_e == std::ldexp(1.0, -16));
  CHECK(rows.back().lambda_e == 64.0);
  for (const auto& r : rows) CHECK(r.model == "two-layer-fixed");
}

TEST_CASE("output is independent of the job count") {
  Workspace ws;
  const std::vector<std::string> sweep = {"sweep-lambda", "--model", "one-layer-fixed,two-layer-fixed",
                                          "--lambda-min-exp", "-2", "--lambda-max-exp", "1", "--num-images", "4"};
  REQUIRE(cli(concat(concat(sweep, ws.common("j1.csv")), {"--jobs", "1"})).code == kExitOk);
  REQUIRE(cli(concat(concat(sweep, ws.common("j3.csv")), {"--jobs", "3"})).code == kExitOk);
  REQUIRE(cli(concat(concat(sweep, ws.common("j1b.csv")), {"--jobs", "1"})).code == kExitOk);
  const std::string a = slurp(ws.out("j1.csv"));
  CHECK(a == slurp(ws.out("j3.csv")));
  CHECK(a == slurp(ws.out("j1b.csv")));
  CHECK(io::parse_csv(a).size() == 2 * 4 * 4);
}

TEST_CASE("make-dict") {
  Workspace ws;
  REQUIRE(cli({"make-dict", "--m", "49", "--n", "30", "--seed", "3", "--out", ws.out("a.lcad")}).code == kExitOk);
  REQUIRE(cli({"make-dict", "--m", "49", "--n", "30", "--seed", "3", "--out", ws.out("b.lcad")}).code == kExitOk);
  REQUIRE(cli({"make-dict", "--m", "49", "--n", "30", "--seed", "4", "--out", ws.out("c.lcad")}).code == kExitOk);
  CHECK(slurp(ws.out("a.lcad")) == slurp(ws.out("b.lcad")));
  CHECK(slurp(ws.out("a.lcad")) != slurp(ws.out("c.lcad")));
  const Dictionary d = load_dictionary(ws.out("a.lcad"));
  CHECK(d.input_dim() == 49);
  CHECK(d.num_features() == 30);

  REQUIRE(cli({"make-dict", "--mode", "overcomplete_dct", "--m", "64", "--n", "100", "--out", ws.out("dct.lcad")})
              .code == kExitOk);
  CHECK(load_dictionary(ws.out("dct.lcad")).num_features() == 100);
}
