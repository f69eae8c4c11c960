#pragma once

#include "lca/dictionary.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lca::io {

/// Images from an IDX3 unsigned-byte file, pixels scaled to [0, 1] by /255.
struct ImageSet {
  std::vector<Eigen::VectorXd> images;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;

  std::size_t count() const { return images.size(); }
  std::size_t pixels() const { return std::size_t{rows} * cols; }
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kMnistSide = 28;

/// Parse big-endian IDX3: magic, count, rows, cols, then count*rows*cols bytes.
/// limit caps how many images are decoded; the payload must still be complete.
ImageSet parse_idx_images(std::span<const std::uint8_t> bytes, std::optional<std::size_t> limit = {});
ImageSet load_idx_images(const std::filesystem::path& path, std::optional<std::size_t> limit = {});

/// Throws if rows*cols != input_dim; writes a warning to `warn` (if given)
/// when the images are not 28x28.
void check_image_dims(const ImageSet& set, Eigen::Index input_dim, std::ostream* warn = nullptr);

/// One CSV line: run identity followed by quality and activity metrics.
struct MetricsRow {
  std::string model;
  double lambda = 0.0;
  double lambda_e = 0.0;
  double tau = 0.0;
  std::int64_t steps = 0;
  std::int64_t image_index = 0;
  double mse = 0.0;
  double sparsity_fraction = 0.0;
  std::int64_t active_count = 0;
  std::int64_t v1_spikes = 0;
  std::int64_t residual_spikes = 0;
  std::int64_t synops = 0;
  std::int64_t wall_ns = 0;
  std::int64_t saturation_events = 0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr std::size_t kCsvColumns = 14;
extern const char* const kCsvHeader;

/// Identity of a run, copied verbatim into the metrics row.
struct RunLabel {
  std::string model;
  double lambda = 0.0;
  double lambda_e = 0.0;
  double tau = 0.0;
  std::int64_t steps = 0;
  std::int64_t image_index = 0;
};

struct ActivityCounters {
  std::uint64_t v1_spikes = 0;
  std::uint64_t residual_spikes = 0;
  std::uint64_t synops = 0;
  std::uint64_t saturation_events = 0;
};

/// mse = ||x - Phi a||^2 / M, sparsity = (N - ||a||_0) / N.
MetricsRow compute_metrics(const RunLabel& label, const Eigen::Ref<const Eigen::VectorXd>& x, const Dictionary& d,
                           const Eigen::Ref<const Eigen::VectorXd>& a, const ActivityCounters& counters,
                           std::int64_t wall_ns);

/// Shortest decimal string that parses back to exactly v.
std::string format_real(double v);

std::string format_csv(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_csv(const std::string& text);
void write_csv(std::span<const MetricsRow> rows, const std::filesystem::path& path);

}  // namespace lca::io
