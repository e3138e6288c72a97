#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bgan/bayesgan.hpp"
#include "bgan/errors.hpp"

namespace bgan {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'B', 'G', 'A', 'N'};

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }

  void put_doubles(const Vector& v) {
    bytes_.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
  }

  void put_spec(const NetworkSpec& spec) {
    put<std::uint32_t>(static_cast<std::uint32_t>(spec.layer_sizes.size()));
    for (int s : spec.layer_sizes) put<std::uint32_t>(static_cast<std::uint32_t>(s));
    put<std::uint8_t>(static_cast<std::uint8_t>(spec.hidden_activation));
    put<std::uint8_t>(static_cast<std::uint8_t>(spec.output_head));
  }

  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  Vector get_doubles(Eigen::Index n, const char* what) {
    need(static_cast<std::size_t>(n) * sizeof(double), what);
    Vector v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, static_cast<std::size_t>(n) * sizeof(double));
    pos_ += static_cast<std::size_t>(n) * sizeof(double);
    return v;
  }

  NetworkSpec get_spec(const char* what) {
    const std::size_t at = pos_;
    const auto n = get<std::uint32_t>(what);
    if (n < 2 || n > 64) throw FormatError(std::string("implausible layer count in ") + what, at);
    NetworkSpec spec;
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::size_t size_at = pos_;
      const auto s = get<std::uint32_t>(what);
      if (s < 1 || s > (1u << 24)) throw FormatError(std::string("implausible layer size in ") + what, size_at);
      spec.layer_sizes.push_back(static_cast<int>(s));
    }
    const std::size_t act_at = pos_;
    if (get<std::uint8_t>(what) != static_cast<std::uint8_t>(Activation::relu)) {
      throw FormatError(std::string("unknown activation in ") + what, act_at);
    }
    const std::size_t head_at = pos_;
    const auto head = get<std::uint8_t>(what);
    if (head > static_cast<std::uint8_t>(OutputHead::softmax)) throw FormatError(std::string("unknown output head in ") + what, head_at);
    spec.output_head = static_cast<OutputHead>(head);
    return spec;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated checkpoint while reading ") + what, pos_);
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

void put_chain(ByteWriter& w, const Chain& c) {
  w.put_doubles(c.params.values);
  w.put_doubles(c.state.v);
  w.put_doubles(c.state.adam_m);
  w.put_doubles(c.state.adam_v);
  w.put<std::int64_t>(c.state.step);
  w.put<std::int64_t>(c.state.d_seen);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.state.phase));
  w.put<std::uint64_t>(c.state.noise_key);
}

Chain get_chain(ByteReader& r, const NetworkSpec& spec) {
  const Eigen::Index p = spec.param_count();
  Chain c;
  c.params = ParamVector(spec, r.get_doubles(p, "chain parameters"));
  c.state.v = r.get_doubles(p, "momentum");
  c.state.adam_m = r.get_doubles(p, "Adam first moment");
  c.state.adam_v = r.get_doubles(p, "Adam second moment");
  c.state.step = r.get<std::int64_t>("step");
  c.state.d_seen = r.get<std::int64_t>("d_seen");
  const std::size_t phase_at = r.pos();
  const auto phase = r.get<std::uint8_t>("phase");
  if (phase > 1) throw FormatError("invalid sampler phase", phase_at);
  c.state.phase = static_cast<Phase>(phase);
  c.state.noise_key = r.get<std::uint64_t>("noise key");
  return c;
}

void put_history(ByteWriter& w, const CollectedSample& s) {
  w.put<std::int64_t>(s.iteration);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.chain));
  w.put_doubles(s.params.values);
}

CollectedSample get_history(ByteReader& r, const NetworkSpec& spec) {
  CollectedSample s;
  s.iteration = r.get<std::int64_t>("history iteration");
  s.chain = static_cast<int>(r.get<std::uint32_t>("history chain"));
  s.params = ParamVector(spec, r.get_doubles(spec.param_count(), "history parameters"));
  return s;
}

}  // namespace

void save_checkpoint(const SampleSet& set, const CheckpointLayout& layout, const std::filesystem::path& path) {
  if (set.gen.empty() || set.disc.empty()) throw ConfigError("cannot checkpoint an empty sample set");
  if (static_cast<int>(set.gen.size()) != layout.J_g * layout.M || static_cast<int>(set.disc.size()) != layout.J_d * layout.M) {
    throw ConfigError("checkpoint layout does not match the sample set");
  }
  const NetworkSpec& gen_spec = set.gen.front().params.spec;
  const NetworkSpec& disc_spec = set.disc.front().params.spec;

  ByteWriter w;
  for (char c : kMagic) w.put<char>(c);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_spec(gen_spec);
  w.put_spec(disc_spec);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(layout.J_g));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(layout.J_d));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(layout.M));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(set.iteration));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(set.d_seen));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(set.epoch));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(set.cursor));
  w.put<std::uint64_t>(set.gen_history.size());
  w.put<std::uint64_t>(set.disc_history.size());
  for (const Chain& c : set.gen) put_chain(w, c);
  for (const Chain& c : set.disc) put_chain(w, c);
  for (const CollectedSample& s : set.gen_history) put_history(w, s);
  for (const CollectedSample& s : set.disc_history) put_history(w, s);

  // Write to a sibling temp file, then rename, so readers never see a partial file.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const std::optional<NetworkSpec>& expected_gen,
                                 const std::optional<NetworkSpec>& expected_disc) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  ByteReader r(std::string(std::istreambuf_iterator<char>(in), {}));

  for (char c : kMagic) {
    const std::size_t at = r.pos();
    if (r.get<char>("magic") != c) throw FormatError("bad checkpoint magic", at);
  }
  const std::size_t version_at = r.pos();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  const NetworkSpec gen_spec = r.get_spec("generator spec");
  const NetworkSpec disc_spec = r.get_spec("discriminator spec");
  if (expected_gen && *expected_gen != gen_spec) {
    throw SpecMismatchError("checkpoint generator " + gen_spec.describe() + " != expected " + expected_gen->describe());
  }
  if (expected_disc && *expected_disc != disc_spec) {
    throw SpecMismatchError("checkpoint discriminator " + disc_spec.describe() + " != expected " +
                            expected_disc->describe());
  }

  LoadedCheckpoint out;
  const std::size_t counts_at = r.pos();
  out.layout.J_g = static_cast<int>(r.get<std::uint32_t>("J_g"));
  out.layout.J_d = static_cast<int>(r.get<std::uint32_t>("J_d"));
  out.layout.M = static_cast<int>(r.get<std::uint32_t>("M"));
  if (out.layout.J_g < 1 || out.layout.J_d < 1 || out.layout.M < 1 || out.layout.J_g > 100000 ||
      out.layout.J_d > 100000 || out.layout.M > 100000) {
    throw FormatError("implausible chain counts", counts_at);
  }
  SampleSet& set = out.samples;
  set.iteration = static_cast<long>(r.get<std::uint64_t>("iteration"));
  set.d_seen = static_cast<long>(r.get<std::uint64_t>("d_seen"));
  set.epoch = static_cast<long>(r.get<std::uint64_t>("epoch"));
  set.cursor = static_cast<long>(r.get<std::uint64_t>("cursor"));
  const auto gen_hist = r.get<std::uint64_t>("generator history length");
  const auto disc_hist = r.get<std::uint64_t>("discriminator history length");

  for (int c = 0; c < out.layout.J_g * out.layout.M; ++c) set.gen.push_back(get_chain(r, gen_spec));
  for (int c = 0; c < out.layout.J_d * out.layout.M; ++c) set.disc.push_back(get_chain(r, disc_spec));
  for (std::uint64_t i = 0; i < gen_hist; ++i) set.gen_history.push_back(get_history(r, gen_spec));
  for (std::uint64_t i = 0; i < disc_hist; ++i) set.disc_history.push_back(get_history(r, disc_spec));
  if (!r.done()) throw FormatError("trailing bytes after checkpoint payload", r.pos());
  return out;
}

bool operator==(const SampleSet& a, const SampleSet& b) {
  auto same_chains = [](const std::vector<Chain>& x, const std::vector<Chain>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(x[i].params == y[i].params) || !(x[i].state == y[i].state)) return false;
    }
    return true;
  };
  auto same_history = [](const std::vector<CollectedSample>& x, const std::vector<CollectedSample>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].iteration != y[i].iteration || x[i].chain != y[i].chain || !(x[i].params == y[i].params)) return false;
    }
    return true;
  };
  return a.iteration == b.iteration && a.d_seen == b.d_seen && a.epoch == b.epoch && a.cursor == b.cursor &&
         same_chains(a.gen, b.gen) && same_chains(a.disc, b.disc) && same_history(a.gen_history, b.gen_history) &&
         same_history(a.disc_history, b.disc_history);
}

}  // namespace bgan
