#include "lca/data_io.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace lca::io {

namespace {

constexpr std::size_t kIdxHeaderBytes = 16;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

ImageSet parse_idx_images(std::span<const std::uint8_t> bytes, std::optional<std::size_t> limit) {
  if (bytes.size() < kIdxHeaderBytes) {
    throw FormatError("IDX header truncated: expected " + std::to_string(kIdxHeaderBytes) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxImageMagic) {
    std::ostringstream msg;
    msg << "bad IDX magic 0x" << std::hex << magic << " (expected 0x00000803)";
    throw FormatError(msg.str());
  }
  ImageSet set;
  const std::uint32_t count = read_be32(bytes, 4);
  set.rows = read_be32(bytes, 8);
  set.cols = read_be32(bytes, 12);
  const std::uint64_t pixels = std::uint64_t{set.rows} * set.cols;
  if (pixels == 0) throw FormatError("IDX image dimensions must be nonzero");

  const std::uint64_t expected = kIdxHeaderBytes + pixels * count;
  if (bytes.size() < expected) {
    throw FormatError("IDX payload truncated: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  }

  const std::size_t n = limit ? std::min<std::size_t>(*limit, count) : count;
  set.images.reserve(n);
  const std::uint8_t* p = bytes.data() + kIdxHeaderBytes;
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::VectorXd img(static_cast<Eigen::Index>(pixels));
    for (Eigen::Index i = 0; i < img.size(); ++i) img(i) = static_cast<double>(*p++) / 255.0;
    set.images.push_back(std::move(img));
  }
  return set;
}

ImageSet load_idx_images(const std::filesystem::path& path, std::optional<std::size_t> limit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_idx_images(bytes, limit);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void check_image_dims(const ImageSet& set, Eigen::Index input_dim, std::ostream* warn) {
  if (static_cast<Eigen::Index>(set.pixels()) != input_dim) {
    throw std::invalid_argument("images are " + std::to_string(set.rows) + "x" + std::to_string(set.cols) +
                                " but the dictionary expects " + std::to_string(input_dim) + " inputs");
  }
  if (warn && (set.rows != kMnistSide || set.cols != kMnistSide)) {
    *warn << "warning: images are " << set.rows << "x" << set.cols << ", not 28x28\n";
  }
}

MetricsRow compute_metrics(const RunLabel& label, const Eigen::Ref<const Eigen::VectorXd>& x, const Dictionary& d,
                           const Eigen::Ref<const Eigen::VectorXd>& a, const ActivityCounters& counters,
                           std::int64_t wall_ns) {
  if (x.size() != d.input_dim() || a.size() != d.num_features()) {
    throw std::invalid_argument("compute_metrics: dimension mismatch");
  }
  MetricsRow row;
  row.model = label.model;
  row.lambda = label.lambda;
  row.lambda_e = label.lambda_e;
  row.tau = label.tau;
  row.steps = label.steps;
  row.image_index = label.image_index;
  row.mse = (x - d.phi() * a).squaredNorm() / static_cast<double>(d.input_dim());
  row.active_count = static_cast<std::int64_t>((a.array() != 0.0).count());
  row.sparsity_fraction =
      static_cast<double>(d.num_features() - row.active_count) / static_cast<double>(d.num_features());
  row.v1_spikes = static_cast<std::int64_t>(counters.v1_spikes);
  row.residual_spikes = static_cast<std::int64_t>(counters.residual_spikes);
  row.synops = static_cast<std::int64_t>(counters.synops);
  row.wall_ns = wall_ns;
  row.saturation_events = static_cast<std::int64_t>(counters.saturation_events);
  return row;
}

const char* const kCsvHeader =
    "model,lambda,lambda_e,tau,steps,image_index,mse,sparsity_fraction,active_count,"
    "v1_spikes,residual_spikes,synops,wall_ns,saturation_events";

std::string format_real(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_real: conversion failed");
  return std::string(buf, end);
}

std::string format_csv(std::span<const MetricsRow> rows) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const MetricsRow& r : rows) {
    if (r.model.find_first_of(",\n\"") != std::string::npos) {
      throw std::invalid_argument("model tag may not contain ',', '\"' or newlines");
    }
    out += r.model;
    for (double v : {r.lambda, r.lambda_e, r.tau}) {
      out += ',';
      out += format_real(v);
    }
    for (std::int64_t v : {r.steps, r.image_index}) {
      out += ',';
      out += std::to_string(v);
    }
    for (double v : {r.mse, r.sparsity_fraction}) {
      out += ',';
      out += format_real(v);
    }
    for (std::int64_t v : {r.active_count, r.v1_spikes, r.residual_spikes, r.synops, r.wall_ns, r.saturation_events}) {
      out += ',';
      out += std::to_string(v);
    }
    out += '\n';
  }
  return out;
}

namespace {

template <typename T>
T parse_field(const std::string& s, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("CSV line " + std::to_string(line) + ": bad field '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<MetricsRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw FormatError("CSV header mismatch");
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != kCsvColumns) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(kCsvColumns) +
                        " fields, got " + std::to_string(f.size()));
    }
    MetricsRow r;
    r.model = f[0];
    r.lambda = parse_field<double>(f[1], line_no);
    r.lambda_e = parse_field<double>(f[2], line_no);
    r.tau = parse_field<double>(f[3], line_no);
    r.steps = parse_field<std::int64_t>(f[4], line_no);
    r.image_index = parse_field<std::int64_t>(f[5], line_no);
    r.mse = parse_field<double>(f[6], line_no);
    r.sparsity_fraction = parse_field<double>(f[7], line_no);
    r.active_count = parse_field<std::int64_t>(f[8], line_no);
    r.v1_spikes = parse_field<std::int64_t>(f[9], line_no);
    r.residual_spikes = parse_field<std::int64_t>(f[10], line_no);
    r.synops = parse_field<std::int64_t>(f[11], line_no);
    r.wall_ns = parse_field<std::int64_t>(f[12], line_no);
    r.saturation_events = parse_field<std::int64_t>(f[13], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_csv(std::span<const MetricsRow> rows, const std::filesystem::path& path) {
  const std::string text = format_csv(rows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace lca::io
