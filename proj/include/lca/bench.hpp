#pragma once

#include "lca/data_io.hpp"
#include "lca/dictionary.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lca::bench {

/// Bad flags or flag values; maps to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// one-layer-float is the double-precision reference solver; the other
/// three run the neuromorphic emulator.
enum class Model { one_layer_float, one_layer_fixed, two_layer_float, two_layer_fixed };

std::string to_string(Model m);
Model parse_model(const std::string& name);
bool is_two_layer(Model m);

/// Thresholds are exponents: lambda = 2^lambda_exp. lambda_e_exp is ignored
/// by one-layer models.
struct RunPoint {
  Model model = Model::one_layer_float;
  int lambda_exp = -1;
  int lambda_e_exp = 6;
};

struct ExecOptions {
  int steps = 256;
  int tau_exp = 7;
  unsigned jobs = 1;
  bool timing = true;
};

/// Exponents representable as Q7.16 thresholds.
inline constexpr int kMinThresholdExp = -16;
inline constexpr int kMaxThresholdExp = 6;

/// What a sweep covers; the CLI fills one of these per subcommand.
struct SweepSpec {
  std::vector<Model> models;
  int lambda_min_exp = -6;
  int lambda_max_exp = 4;
  int lambda_e_min_exp = 6;
  int lambda_e_max_exp = 6;
  std::size_t num_images = 10;
  std::uint64_t seed = 0;

  void validate() const;
  /// Cartesian grid in (model, lambda, lambda_e) order.
  std::vector<RunPoint> grid() const;
};

/// k distinct indices in [0, available), drawn with a seeded generator and
/// returned in ascending order.
std::vector<std::size_t> sample_images(std::size_t available, std::size_t k, std::uint64_t seed);

/// Run every point on every selected image (batch size 1, state reset per
/// image). Rows come back sorted by (model, lambda, lambda_e, image index)
/// whatever the job count.
std::vector<io::MetricsRow> execute(const Dictionary& d, const io::ImageSet& images,
                                    std::span<const RunPoint> points, std::span<const std::size_t> image_indices,
                                    const ExecOptions& opts);

/// Entry point shared by the lca_bench binary and the tests.
/// Returns kExitOk, kExitUsage or kExitRuntime. The vector form takes the
/// arguments without the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lca::bench
