#include "bgan/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "bgan/errors.hpp"

namespace bgan {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::uint32_t read_be32(const std::string& bytes, std::size_t at, const std::string& file) {
  if (bytes.size() < at + 4) throw FormatError("truncated IDX header in " + file, bytes.size());
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[at + static_cast<std::size_t>(i)]);
  return v;
}

void put_be32(std::string& bytes, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) bytes.push_back(static_cast<char>((v >> shift) & 0xFF));
}

void check_synthetic_args(const Matrix& A, long n, double z_var, double noise_var) {
  if (n < 1) throw ConfigError("synthetic sample count must be >= 1");
  if (A.rows() < 1 || A.cols() < 1) throw ConfigError("mixing matrix must be non-empty");
  if (!(z_var >= 0.0) || !(noise_var >= 0.0)) throw ConfigError("variances must be >= 0");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

}  // namespace

Dataset subset(const Dataset& data, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.image_rows = data.image_rows;
  out.image_cols = data.image_cols;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), data.x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = data.x.row(rows[i]);
    if (data.labeled()) out.y.push_back(data.y[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (d < 1 || D < 1) throw ConfigError("synthetic dimensions must be >= 1");
  if (d >= D) throw ConfigError("synthetic latent dimension d must be < D");
  if (n < 1) throw ConfigError("synthetic sample count must be >= 1");
  if (!(z_var >= 0.0) || !(noise_var >= 0.0)) throw ConfigError("synthetic variances must be >= 0");
}

SyntheticData sample_linear_gaussian(const Matrix& A, long n, double z_var, double noise_var, Stream& stream) {
  check_synthetic_args(A, n, z_var, noise_var);
  SyntheticData out;
  out.A = A;
  out.latents = stream.normal_matrix(n, A.cols(), std::sqrt(z_var));
  out.data.x = out.latents * A.transpose();
  if (noise_var > 0.0) out.data.x += stream.normal_matrix(n, A.rows(), std::sqrt(noise_var));
  return out;
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Stream root(spec.seed);
  Stream a_stream = root.split(1);
  const Matrix A = a_stream.normal_matrix(spec.D, spec.d);
  Stream x_stream = root.split(2);
  return sample_linear_gaussian(A, spec.n, spec.z_var, spec.noise_var, x_stream);
}

Dataset sample_classes(const std::vector<Matrix>& A, long n, double z_var, double noise_var, Stream& stream) {
  if (A.empty()) throw ConfigError("need at least one class matrix");
  const int K = static_cast<int>(A.size());
  Dataset out;
  out.num_classes = K;
  out.x.resize(n, A.front().rows());
  out.y.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < K; ++k) {
    const long count = n / K + (k < n % K ? 1 : 0);
    if (count == 0) continue;
    const SyntheticData part = sample_linear_gaussian(A[static_cast<std::size_t>(k)], count, z_var, noise_var, stream);
    for (long r = 0; r < count; ++r) {
      const long i = r * K + k;
      out.x.row(i) = part.data.x.row(r);
      out.y[static_cast<std::size_t>(i)] = k + 1;
    }
  }
  return out;
}

ClassSyntheticData gen_synthetic_classes(const SyntheticSpec& spec, int K) {
  spec.validate();
  if (K < 2) throw ConfigError("class-synthetic data needs K >= 2");
  const Stream root(spec.seed);
  ClassSyntheticData out;
  for (int k = 0; k < K; ++k) {
    Stream a_stream = root.split(100 + static_cast<std::uint64_t>(k));
    out.A.push_back(a_stream.normal_matrix(spec.D, spec.d));
  }
  Stream x_stream = root.split(2);
  out.data = sample_classes(out.A, spec.n, spec.z_var, spec.noise_var, x_stream);
  return out;
}

LabeledSplit make_split(const Dataset& pool, long N_s, std::uint64_t seed, Dataset test) {
  if (!pool.labeled()) throw ConfigError("make_split needs a labeled pool");
  const int K = pool.num_classes;
  if (K < 1) throw ConfigError("labeled pool has no classes");
  if (N_s < K) throw ConfigError("N_s = " + std::to_string(N_s) + " cannot cover K = " + std::to_string(K) + " classes");
  if (N_s > pool.size()) throw ConfigError("N_s exceeds the labeled pool size");

  Stream stream = Stream(seed).split(0x5317);
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(K));
  for (Eigen::Index i = 0; i < pool.size(); ++i) {
    const int y = pool.y[static_cast<std::size_t>(i)];
    if (y < 1 || y > K) throw DataError("label " + std::to_string(y) + " outside 1.." + std::to_string(K));
    by_class[static_cast<std::size_t>(y - 1)].push_back(i);
  }
  for (auto& members : by_class) std::shuffle(members.begin(), members.end(), stream);

  // Quotas N_s/K each; the remainder goes to a random set of classes.
  std::vector<int> class_order(static_cast<std::size_t>(K));
  std::iota(class_order.begin(), class_order.end(), 0);
  std::shuffle(class_order.begin(), class_order.end(), stream);
  std::vector<long> quota(static_cast<std::size_t>(K), N_s / K);
  for (long r = 0; r < N_s % K; ++r) ++quota[static_cast<std::size_t>(class_order[static_cast<std::size_t>(r)])];

  std::vector<char> chosen(static_cast<std::size_t>(pool.size()), 0);
  std::vector<Eigen::Index> labeled_rows;
  for (int k = 0; k < K; ++k) {
    const auto& members = by_class[static_cast<std::size_t>(k)];
    const long q = quota[static_cast<std::size_t>(k)];
    if (static_cast<long>(members.size()) < q) {
      throw ConfigError("class " + std::to_string(k + 1) + " has " + std::to_string(members.size()) +
                        " members, fewer than its labeled quota " + std::to_string(q));
    }
    for (long i = 0; i < q; ++i) {
      labeled_rows.push_back(members[static_cast<std::size_t>(i)]);
      chosen[static_cast<std::size_t>(members[static_cast<std::size_t>(i)])] = 1;
    }
  }
  std::sort(labeled_rows.begin(), labeled_rows.end());
  std::vector<Eigen::Index> rest;
  for (Eigen::Index i = 0; i < pool.size(); ++i) {
    if (!chosen[static_cast<std::size_t>(i)]) rest.push_back(i);
  }

  LabeledSplit split;
  split.labeled = subset(pool, labeled_rows);
  split.unlabeled = subset(pool, rest);
  split.test = std::move(test);
  return split;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const std::string img = slurp(images);
  const std::string lab = slurp(labels);
  const std::string img_name = images.filename().string();
  const std::string lab_name = labels.filename().string();

  if (read_be32(img, 0, img_name) != kImageMagic) throw FormatError("bad image magic in " + img_name, 0);
  if (read_be32(lab, 0, lab_name) != kLabelMagic) throw FormatError("bad label magic in " + lab_name, 0);
  const std::uint32_t count = read_be32(img, 4, img_name);
  const std::uint32_t rows = read_be32(img, 8, img_name);
  const std::uint32_t cols = read_be32(img, 12, img_name);
  const std::uint32_t label_count = read_be32(lab, 4, lab_name);
  if (label_count != count) {
    throw FormatError("label count " + std::to_string(label_count) + " != image count " + std::to_string(count) +
                          " in " + lab_name,
                      4);
  }
  if (rows == 0 || cols == 0) throw FormatError("zero image dimension in " + img_name, rows == 0 ? 8 : 12);

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  const std::size_t img_need = 16 + pixels * count;
  const std::size_t lab_need = 8 + static_cast<std::size_t>(count);
  if (img.size() < img_need) throw FormatError("truncated image payload in " + img_name, img.size());
  if (lab.size() < lab_need) throw FormatError("truncated label payload in " + lab_name, lab.size());
  if (img.size() > img_need) throw FormatError("trailing bytes in " + img_name, img_need);
  if (lab.size() > lab_need) throw FormatError("trailing bytes in " + lab_name, lab_need);

  Dataset out;
  out.image_rows = static_cast<int>(rows);
  out.image_cols = static_cast<int>(cols);
  out.x.resize(count, static_cast<Eigen::Index>(pixels));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t base = 16 + pixels * i;
    for (std::size_t p = 0; p < pixels; ++p) {
      out.x(i, static_cast<Eigen::Index>(p)) = static_cast<unsigned char>(img[base + p]) / 127.5 - 1.0;
    }
  }
  out.y.resize(count);
  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const int raw = static_cast<unsigned char>(lab[8 + i]);
    out.y[i] = raw + 1;
    max_label = std::max(max_label, raw + 1);
  }
  out.num_classes = std::max(max_label, 10);
  return out;
}

void write_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (data.image_rows < 1 || data.image_cols < 1) throw ConfigError("write_idx needs image dimensions");
  if (data.x.cols() != static_cast<Eigen::Index>(data.image_rows) * data.image_cols) {
    throw ShapeError("row width does not match image dimensions");
  }
  if (!data.labeled() || static_cast<Eigen::Index>(data.y.size()) != data.size()) {
    throw ConfigError("write_idx needs one label per image");
  }
  std::string img;
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  put_be32(img, static_cast<std::uint32_t>(data.image_rows));
  put_be32(img, static_cast<std::uint32_t>(data.image_cols));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index p = 0; p < data.dim(); ++p) {
      const double v = std::round((data.x(i, p) + 1.0) * 127.5);
      img.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0.0, 255.0))));
    }
  }
  std::string lab;
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int y : data.y) {
    if (y < 1 || y > 256) throw DataError("label " + std::to_string(y) + " cannot be stored as a byte");
    lab.push_back(static_cast<char>(static_cast<unsigned char>(y - 1)));
  }
  dump(images, img);
  dump(labels, lab);
}

Dataset downsample(const Dataset& data, int factor) {
  if (factor < 1) throw ConfigError("downsample factor must be >= 1");
  if (data.image_rows < 1 || data.image_cols < 1) throw ConfigError("downsample needs image data");
  if (data.image_rows % factor != 0 || data.image_cols % factor != 0) {
    throw ConfigError("image " + std::to_string(data.image_rows) + "x" + std::to_string(data.image_cols) +
                      " is not divisible by factor " + std::to_string(factor));
  }
  const int out_rows = data.image_rows / factor;
  const int out_cols = data.image_cols / factor;
  const double inv = 1.0 / (static_cast<double>(factor) * factor);

  Dataset out;
  out.y = data.y;
  out.num_classes = data.num_classes;
  out.image_rows = out_rows;
  out.image_cols = out_cols;
  out.x.setZero(data.size(), static_cast<Eigen::Index>(out_rows) * out_cols);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (int r = 0; r < data.image_rows; ++r) {
      for (int c = 0; c < data.image_cols; ++c) {
        out.x(i, (r / factor) * out_cols + c / factor) += data.x(i, r * data.image_cols + c);
      }
    }
  }
  out.x *= inv;
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  const bool labeled = data.labeled();
  if (labeled) out << "label";
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << (labeled || j > 0 ? "," : "") << 'x' << j;
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (labeled) out << data.y[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << (labeled || j > 0 ? "," : "") << format_double(data.x(i, j));
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError(path.string() + " is empty");
  const bool labeled = header.rfind("label", 0) == 0;
  const auto width = static_cast<Eigen::Index>(std::count(header.begin(), header.end(), ',') + 1 - (labeled ? 1 : 0));

  std::vector<double> values;
  Dataset out;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string field;
    Eigen::Index got = 0;
    bool first = true;
    while (std::getline(fields, field, ',')) {
      if (first && labeled) {
        out.y.push_back(std::stoi(field));
        first = false;
        continue;
      }
      first = false;
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc()) throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
      values.push_back(v);
      ++got;
    }
    if (got != width) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) + " values");
  }
  const auto n = static_cast<Eigen::Index>(values.size()) / std::max<Eigen::Index>(width, 1);
  out.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), n, width);
  if (labeled) out.num_classes = out.y.empty() ? 0 : *std::max_element(out.y.begin(), out.y.end());
  return out;
}

}  // namespace bgan
