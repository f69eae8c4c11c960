#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lca {

/// Raised for malformed dictionary or image files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a column cannot be normalized.
class ZeroColumnError : public std::invalid_argument {
 public:
  explicit ZeroColumnError(Eigen::Index column)
      : std::invalid_argument("dictionary column " + std::to_string(column) + " is all zero"),
        column_(column) {}
  Eigen::Index column() const { return column_; }

 private:
  Eigen::Index column_;
};

/// M x N matrix whose columns are unit-norm feature vectors.
///
/// Construction validates the invariants (finite entries, every column norm
/// within kNormTolerance of 1); instances are immutable afterwards.
class Dictionary {
 public:
  static constexpr double kNormTolerance = 1e-4;

  explicit Dictionary(Eigen::MatrixXd phi);

  const Eigen::MatrixXd& phi() const { return phi_; }
  Eigen::Index input_dim() const { return phi_.rows(); }
  Eigen::Index num_features() const { return phi_.cols(); }

  /// Phi^T Phi.
  Eigen::MatrixXd gram() const;

 private:
  Eigen::MatrixXd phi_;
};

/// Scale each column to unit L2 norm. Throws ZeroColumnError.
Dictionary normalize_columns(Eigen::MatrixXd phi);

/// -tau * (Phi^T Phi - I), with an exactly zero diagonal.
Eigen::MatrixXd lateral_weights(const Dictionary& d, double tau);

enum class SynthMode { gaussian, overcomplete_dct };

SynthMode parse_synth_mode(const std::string& name);

/// Seeded stand-in for a trained dictionary.
///
/// gaussian: i.i.d. N(0, 1) entries, columns normalized.
/// overcomplete_dct: separable 2-D DCT-II atoms on a side x side patch
/// (side = sqrt(input_dim); a non-square input_dim uses a 1-D patch) with
/// ceil(sqrt(num_features)) frequencies per axis, first num_features atoms
/// in row-major frequency order. The seed does not affect this mode.
Dictionary synth_dictionary(std::uint64_t seed, SynthMode mode, Eigen::Index input_dim,
                            Eigen::Index num_features);

// File format, little-endian: "LCAD", u32 version = 1, u32 M, u32 N, then M*N
// binary32 values column-major. No padding, no trailing bytes.
inline constexpr std::uint32_t kDictionaryVersion = 1;

std::vector<std::uint8_t> encode_dictionary(const Dictionary& d);

/// Columns whose norm is off by more than kNormTolerance but at most
/// kLoadRenormTolerance are re-normalized; worse columns are rejected.
inline constexpr double kLoadRenormTolerance = 1e-3;
Dictionary decode_dictionary(std::span<const std::uint8_t> bytes);

Dictionary load_dictionary(const std::filesystem::path& path);
void save_dictionary(const Dictionary& d, const std::filesystem::path& path);

}  // namespace lca
