#include "lca/dictionary.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

namespace lca {

Dictionary::Dictionary(Eigen::MatrixXd phi) : phi_(std::move(phi)) {
  if (phi_.rows() < 1 || phi_.cols() < 1) throw std::invalid_argument("dictionary must be at least 1x1");
  if (!phi_.allFinite()) throw std::invalid_argument("dictionary has non-finite entries");
  for (Eigen::Index j = 0; j < phi_.cols(); ++j) {
    const double norm = phi_.col(j).norm();
    if (std::abs(norm - 1.0) > kNormTolerance) {
      throw std::invalid_argument("dictionary column " + std::to_string(j) + " has norm " +
                                  std::to_string(norm) + ", expected 1");
    }
  }
}

Eigen::MatrixXd Dictionary::gram() const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(phi_.cols(), phi_.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(phi_.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

Dictionary normalize_columns(Eigen::MatrixXd phi) {
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    const double norm = phi.col(j).norm();
    if (norm == 0.0) throw ZeroColumnError(j);
    phi.col(j) /= norm;
  }
  return Dictionary(std::move(phi));
}

Eigen::MatrixXd lateral_weights(const Dictionary& d, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("lateral_weights: tau must be > 0");
  Eigen::MatrixXd w = -tau * d.gram();
  w.diagonal().setZero();
  return w;
}

SynthMode parse_synth_mode(const std::string& name) {
  if (name == "gaussian") return SynthMode::gaussian;
  if (name == "overcomplete_dct" || name == "overcomplete-dct" || name == "dct") {
    return SynthMode::overcomplete_dct;
  }
  throw std::invalid_argument("unknown dictionary mode '" + name + "'");
}

namespace {

Eigen::MatrixXd dct_atoms_1d(Eigen::Index samples, Eigen::Index frequencies) {
  Eigen::MatrixXd a(samples, frequencies);
  for (Eigen::Index k = 0; k < frequencies; ++k) {
    for (Eigen::Index n = 0; n < samples; ++n) {
      a(n, k) = std::cos(std::numbers::pi * (static_cast<double>(n) + 0.5) * static_cast<double>(k) /
                         static_cast<double>(frequencies));
    }
  }
  return a;
}

Eigen::MatrixXd overcomplete_dct(Eigen::Index input_dim, Eigen::Index num_features) {
  const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(input_dim))));
  Eigen::MatrixXd phi(input_dim, num_features);
  if (side * side != input_dim) {
    phi = dct_atoms_1d(input_dim, num_features);
    return phi;
  }
  auto freqs = static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(num_features))));
  while (freqs * freqs < num_features) ++freqs;
  const Eigen::MatrixXd a = dct_atoms_1d(side, freqs);
  for (Eigen::Index f = 0; f < num_features; ++f) {
    const Eigen::Index ky = f / freqs;
    const Eigen::Index kx = f % freqs;
    for (Eigen::Index r = 0; r < side; ++r) {
      for (Eigen::Index c = 0; c < side; ++c) phi(r * side + c, f) = a(r, ky) * a(c, kx);
    }
  }
  return phi;
}

}  // namespace

Dictionary synth_dictionary(std::uint64_t seed, SynthMode mode, Eigen::Index input_dim,
                            Eigen::Index num_features) {
  if (input_dim < 1 || num_features < 1) {
    throw std::invalid_argument("synth_dictionary: dimensions must be >= 1");
  }
  Eigen::MatrixXd phi(input_dim, num_features);
  switch (mode) {
    case SynthMode::gaussian: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      // Column-major fill so a feature's draws are consecutive.
      for (Eigen::Index j = 0; j < num_features; ++j) {
        for (Eigen::Index i = 0; i < input_dim; ++i) phi(i, j) = normal(rng);
        // A zero column has probability 0 but would be fatal; redraw it.
        while (phi.col(j).squaredNorm() == 0.0) {
          for (Eigen::Index i = 0; i < input_dim; ++i) phi(i, j) = normal(rng);
        }
      }
      break;
    }
    case SynthMode::overcomplete_dct:
      phi = overcomplete_dct(input_dim, num_features);
      break;
  }
  return normalize_columns(std::move(phi));
}

namespace {

constexpr std::uint8_t kMagic[4] = {0x4C, 0x43, 0x41, 0x44};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | bytes[offset + static_cast<std::size_t>(b)];
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_dictionary(const Dictionary& d) {
  const auto m = static_cast<std::uint32_t>(d.input_dim());
  const auto n = static_cast<std::uint32_t>(d.num_features());
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * std::size_t{m} * n);
  for (std::uint8_t b : kMagic) out.push_back(b);
  put_u32(out, kDictionaryVersion);
  put_u32(out, m);
  put_u32(out, n);
  for (Eigen::Index j = 0; j < d.num_features(); ++j) {
    for (Eigen::Index i = 0; i < d.input_dim(); ++i) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(d.phi()(i, j))));
    }
  }
  return out;
}

Dictionary decode_dictionary(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw FormatError("dictionary header truncated: expected " + std::to_string(kHeaderBytes) +
                      " bytes, got " + std::to_string(bytes.size()));
  }
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("bad dictionary magic (expected \"LCAD\")");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kDictionaryVersion) {
    throw FormatError("unsupported dictionary version " + std::to_string(version));
  }
  const std::uint32_t m = get_u32(bytes, 8);
  const std::uint32_t n = get_u32(bytes, 12);
  if (m == 0 || n == 0) throw FormatError("dictionary dimensions must be nonzero");

  const std::uint64_t expected = kHeaderBytes + 4ULL * m * n;
  if (bytes.size() != expected) {
    throw FormatError("dictionary payload size mismatch: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  }

  Eigen::MatrixXd phi(m, n);
  std::size_t offset = kHeaderBytes;
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    for (Eigen::Index i = 0; i < phi.rows(); ++i, offset += 4) {
      const float v = std::bit_cast<float>(get_u32(bytes, offset));
      if (!std::isfinite(v)) {
        throw FormatError("non-finite dictionary entry at row " + std::to_string(i) + ", column " +
                          std::to_string(j));
      }
      phi(i, j) = v;
    }
  }

  // Norms inside the invariant tolerance are left untouched so that
  // save -> load -> save reproduces the same bytes.
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    const double deviation = std::abs(phi.col(j).norm() - 1.0);
    if (deviation > kLoadRenormTolerance) {
      throw FormatError("dictionary column " + std::to_string(j) + " has norm deviation " +
                        std::to_string(deviation) + " beyond tolerance");
    }
    if (deviation > Dictionary::kNormTolerance) phi.col(j).normalize();
  }
  return Dictionary(std::move(phi));
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dictionary file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return decode_dictionary(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_dictionary(const Dictionary& d, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_dictionary(d);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace lca
