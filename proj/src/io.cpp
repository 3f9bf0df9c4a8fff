#include "temb/io.hpp"

#include <boost/crc.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

static_assert(std::endian::native == std::endian::little, "index and point files are little-endian");

namespace temb {

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, const std::string& where) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw IoError("malformed number '" + std::string(s) + "' " + where);
  if (!std::isfinite(value)) throw IoError("non-finite value " + where);
  return value;
}

Matrix parse_csv(const std::string& text, const std::string& path) {
  std::vector<double> values;
  std::size_t d = 0, n = 0, line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;
    std::size_t count = 0;
    while (true) {
      auto comma = row.find(',');
      values.push_back(parse_double(row.substr(0, comma), "at " + path + ":" + std::to_string(line_no)));
      ++count;
      if (comma == std::string_view::npos) break;
      row.remove_prefix(comma + 1);
    }
    if (n == 0) d = count;
    if (count != d) throw IoError("ragged row at " + path + ":" + std::to_string(line_no));
    ++n;
  }
  Matrix M(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  std::copy(values.begin(), values.end(), M.data());
  return M;
}

}  // namespace

Matrix read_matrix(const std::string& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kPointMagic, 4) != 0) return parse_csv(bytes, path);
  constexpr std::size_t header = 4 + 4 + 8 + 8;
  if (bytes.size() < header) throw IoError("truncated header in " + path);
  std::uint32_t version;
  std::uint64_t n, d;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&n, bytes.data() + 8, 8);
  std::memcpy(&d, bytes.data() + 16, 8);
  if (version != kPointVersion) throw IoError("unsupported point file version in " + path);
  if (d != 0 && n > (bytes.size() - header) / 8 / d) throw IoError("truncated data in " + path);
  if (bytes.size() != header + n * d * 8) throw IoError("size mismatch in " + path);
  Matrix M(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  if (n != 0 && d != 0) std::memcpy(M.data(), bytes.data() + header, n * d * 8);
  if (!M.allFinite()) throw IoError("non-finite coordinates in " + path);
  return M;
}

PointSet read_points(const std::string& path) {
  Matrix M = read_matrix(path);
  if (M.cols() == 0) throw IoError("no points in " + path);
  return PointSet(std::move(M));
}

void write_matrix(const std::string& path, const Matrix& columns) {
  std::string bytes(kPointMagic, 4);
  auto put = [&bytes](const void* p, std::size_t size) { bytes.append(static_cast<const char*>(p), size); };
  std::uint64_t n = static_cast<std::uint64_t>(columns.cols()), d = static_cast<std::uint64_t>(columns.rows());
  put(&kPointVersion, 4);
  put(&n, 8);
  put(&d, 8);
  if (n != 0 && d != 0) put(columns.data(), n * d * 8);
  spill(path, bytes);
}

namespace {

struct Field {
  std::function<void(TerminalConfig&, const std::string&)> set;
  std::function<std::string(const TerminalConfig&)> get;
};

std::string show(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string show(std::size_t x) { return x == kNoCap ? "none" : std::to_string(x); }

double as_double(const std::string& v) { return parse_double(v, "in config"); }

std::size_t as_size(const std::string& v) {
  if (v == "none") return kNoCap;
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw IoError("malformed count '" + v + "' in config");
  return out;
}

bool as_bool(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw IoError("malformed flag '" + v + "' in config");
}

template <typename M>
Field real(M member) {
  return {[member](TerminalConfig& c, const std::string& v) { std::invoke(member, c) = as_double(v); },
          [member](const TerminalConfig& c) { return show(std::invoke(member, const_cast<TerminalConfig&>(c))); }};
}

template <typename M>
Field count(M member) {
  return {[member](TerminalConfig& c, const std::string& v) { std::invoke(member, c) = as_size(v); },
          [member](const TerminalConfig& c) { return show(std::invoke(member, const_cast<TerminalConfig&>(c))); }};
}

template <typename M>
Field flag(M member) {
  return {[member](TerminalConfig& c, const std::string& v) { std::invoke(member, c) = as_bool(v); },
          [member](const TerminalConfig& c) { return std::string(std::invoke(member, const_cast<TerminalConfig&>(c)) ? "on" : "off"); }};
}

Field ap_backend(ApParams TerminalConfig::*ap) {
  return {[ap](TerminalConfig& c, const std::string& v) {
            if (v == "trivial")
              (c.*ap).backend = ApBackend::trivial;
            else if (v == "hyperplane-lsh")
              (c.*ap).backend = ApBackend::hyperplane_lsh;
            else
              throw IoError("unknown partition backend '" + v + "'");
          },
          [ap](const TerminalConfig& c) {
            return std::string((c.*ap).backend == ApBackend::trivial ? "trivial" : "hyperplane-lsh");
          }};
}

const std::map<std::string, Field>& fields() {
  using C = TerminalConfig;
  static const std::map<std::string, Field> table = {
      {"eps", real(&C::eps)},
      {"c_dagger", real(&C::c_dagger)},
      {"c_k", real(&C::c_k)},
      {"k", count(&C::k)},
      {"delta", real(&C::delta)},
      {"eps_acc", real(&C::eps_acc)},
      {"tree.c_prob", real([](C& c) -> double& { return c.tree.c_prob; })},
      {"tree.c_rounds", real([](C& c) -> double& { return c.tree.c_rounds; })},
      {"tree.retries", {[](C& c, const std::string& v) { c.tree.retries = static_cast<int>(as_size(v)); },
                        [](const C& c) { return std::to_string(c.tree.retries); }}},
      {"aann.backend", {[](C& c, const std::string& v) {
                          if (v == "brute")
                            c.aann.backend = AnnBackend::brute;
                          else if (v == "lsh")
                            c.aann.backend = AnnBackend::lsh;
                          else
                            throw IoError("unknown ann backend '" + v + "'");
                        },
                        [](const C& c) { return std::string(c.aann.backend == AnnBackend::brute ? "brute" : "lsh"); }}},
      {"aann.tables", count([](C& c) -> std::size_t& { return c.aann.ap.tables; })},
      {"aann.bits", count([](C& c) -> std::size_t& { return c.aann.ap.bits; })},
      {"aann.width", real([](C& c) -> double& { return c.aann.ap.width; })},
      {"aann.c", real([](C& c) -> double& { return c.aann.c; })},
      {"aann.gamma", real([](C& c) -> double& { return c.aann.gamma; })},
      {"aann.alpha", real([](C& c) -> double& { return c.aann.alpha; })},
      {"aann.beta", real([](C& c) -> double& { return c.aann.beta; })},
      {"aann.c_range", real([](C& c) -> double& { return c.aann.c_range; })},
      {"aann.copies", count([](C& c) -> std::size_t& { return c.aann.copies; })},
      {"aann.c_bottom", real([](C& c) -> double& { return c.aann.c_bottom; })},
      {"aann.space_cap", count([](C& c) -> std::size_t& { return c.aann.space_cap; })},
      {"gamma_term", real(&C::gamma_term)},
      {"beta_term", real(&C::beta_term)},
      {"rho_rep", real(&C::rho_rep)},
      {"c1", real(&C::c1)},
      {"c2", real(&C::c2)},
      {"c3", real(&C::c3)},
      {"ap.backend", ap_backend(&C::ap)},
      {"ap.tables", count([](C& c) -> std::size_t& { return c.ap.tables; })},
      {"ap.bits", count([](C& c) -> std::size_t& { return c.ap.bits; })},
      {"ap.width", real([](C& c) -> double& { return c.ap.width; })},
      {"ap.space_cap", count([](C& c) -> std::size_t& { return c.ap.space_cap; })},
      {"ap.probe_cap", count([](C& c) -> std::size_t& { return c.ap.probe_cap; })},
      {"cap_unassigned", count(&C::cap_unassigned)},
      {"cap_assigned", count(&C::cap_assigned)},
      {"lifted", {[](C& c, const std::string& v) {
                    if (v == "brute")
                      c.lifted = LiftedBackend::brute;
                    else if (v == "simhash")
                      c.lifted = LiftedBackend::simhash;
                    else
                      throw IoError("unknown lifted backend '" + v + "'");
                  },
                  [](const C& c) { return std::string(c.lifted == LiftedBackend::brute ? "brute" : "simhash"); }}},
      {"lifted.tables", count(&C::lifted_tables)},
      {"lifted.bits", count(&C::lifted_bits)},
      {"scale_window", flag(&C::scale_window)},
      {"deterministic_queries", flag(&C::deterministic_queries)},
      {"probe_cap", count(&C::probe_cap)},
      {"median_jl", flag(&C::median_jl)},
      {"mjl.sketches", count(&C::mjl_sketches)},
      {"mjl.rows", count(&C::mjl_rows)},
      {"mjl.samples", count(&C::mjl_samples)},
  };
  return table;
}

}  // namespace

void apply_config_value(TerminalConfig& config, const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw IoError("unknown config key '" + key + "'");
  it->second.set(config, value);
}

void apply_config_text(TerminalConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = line;
    if (auto hash = row.find('#'); hash != std::string_view::npos) row = row.substr(0, hash);
    row = trim(row);
    if (row.empty()) continue;
    auto eq = row.find('=');
    if (eq == std::string_view::npos) throw IoError("config line " + std::to_string(line_no) + " has no '='");
    apply_config_value(config, std::string(trim(row.substr(0, eq))), std::string(trim(row.substr(eq + 1))));
  }
}

void apply_config_file(TerminalConfig& config, const std::string& path) { apply_config_text(config, slurp(path)); }

std::string config_text(const TerminalConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

void apply_lsh_preset(TerminalConfig& config) {
  config.aann.backend = AnnBackend::lsh;
  config.aann.copies = 2;
  config.aann.gamma = 0.5;
  config.aann.alpha = 2.0;
  config.aann.ap.tables = 2;
  config.ap.backend = ApBackend::hyperplane_lsh;
  config.ap.tables = 1;
  config.lifted = LiftedBackend::simhash;
  config.lifted_tables = 1;
  config.gamma_term = 0.5;
}

std::uint64_t crc64(const void* data, std::size_t size) {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, 0xFFFFFFFFFFFFFFFFULL, 0xFFFFFFFFFFFFFFFFULL, true, true> crc;
  crc.process_bytes(data, size);
  return crc.checksum();
}

struct Serializer {
  std::string bytes;

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& x) {
    bytes.append(reinterpret_cast<const char*>(&x), sizeof x);
  }
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const std::vector<T>& v) {
    put(static_cast<std::uint64_t>(v.size()));
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
  }
  void put(const std::string& s) {
    put(static_cast<std::uint64_t>(s.size()));
    bytes.append(s);
  }
  void put(const Matrix& M) {
    put(static_cast<std::uint64_t>(M.rows()));
    put(static_cast<std::uint64_t>(M.cols()));
    bytes.append(reinterpret_cast<const char*>(M.data()), static_cast<std::size_t>(M.size()) * 8);
  }
  void put(const Vector& v) {
    put(static_cast<std::uint64_t>(v.size()));
    bytes.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * 8);
  }
  void put(const Partition& P) {
    put(static_cast<std::uint64_t>(P.blocks.size()));
    for (const auto& b : P.blocks) put(b);
  }

  void put(const ApStructure& a) {
    put(static_cast<std::uint8_t>(a.backend_));
    put(a.r_);
    put(a.width_);
    put(static_cast<std::uint64_t>(a.bits_));
    put(static_cast<std::uint64_t>(a.probe_cap_));
    put(a.centroid_);
    put(a.directions_);
    put(a.offsets_);
    put(a.ids_);
    put(a.buckets_);
    std::vector<std::uint64_t> first(a.table_first_.begin(), a.table_first_.end());
    put(first);
  }
  void put(const AnnStructure& s) {
    put(static_cast<std::uint8_t>(s.backend_));
    put(s.r_);
    put(s.c_);
    put(s.ids_);
    put(s.ap_);
  }
};

namespace {

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void raw(void* out, std::size_t size) {
    if (size > bytes_.size() - pos_) throw IoError("truncated index");
    std::memcpy(out, bytes_.data() + pos_, size);
    pos_ += size;
  }
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    T x;
    raw(&x, sizeof x);
    return x;
  }
  std::uint64_t length(std::size_t element) {
    auto n = get<std::uint64_t>();
    if (element && n > (bytes_.size() - pos_) / element) throw IoError("truncated index");
    return n;
  }
  template <typename T>
  std::vector<T> vec() {
    std::vector<T> v(length(sizeof(T)));
    if (!v.empty()) raw(v.data(), v.size() * sizeof(T));
    return v;
  }
  std::string str() {
    std::string s(length(1), '\0');
    if (!s.empty()) raw(s.data(), s.size());
    return s;
  }
  Matrix matrix() {
    auto r = get<std::uint64_t>();
    auto c = length(0);
    if (r && c > (bytes_.size() - pos_) / 8 / r) throw IoError("truncated index");
    Matrix M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    if (M.size()) raw(M.data(), static_cast<std::size_t>(M.size()) * 8);
    return M;
  }
  Vector vector() {
    Vector v(static_cast<Eigen::Index>(length(8)));
    if (v.size()) raw(v.data(), static_cast<std::size_t>(v.size()) * 8);
    return v;
  }
  Partition partition() {
    Partition P;
    P.blocks.resize(length(8));
    for (auto& b : P.blocks) b = vec<std::uint32_t>();
    return P;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

struct Deserializer {
  static ApStructure ap(Reader& in) {
    ApStructure a;
    a.backend_ = static_cast<ApBackend>(in.get<std::uint8_t>());
    a.r_ = in.get<double>();
    a.width_ = in.get<double>();
    a.bits_ = in.get<std::uint64_t>();
    a.probe_cap_ = in.get<std::uint64_t>();
    a.centroid_ = in.vector();
    a.directions_ = in.matrix();
    a.offsets_ = in.vector();
    a.ids_ = in.vec<std::uint32_t>();
    a.buckets_ = in.vec<ApStructure::Bucket>();
    auto first = in.vec<std::uint64_t>();
    a.table_first_.assign(first.begin(), first.end());
    for (const auto& b : a.buckets_)
      if (b.begin > b.end || b.end > a.ids_.size()) throw IoError("corrupt bucket in index");
    return a;
  }
  static AnnStructure ann(Reader& in) {
    AnnStructure s;
    s.backend_ = static_cast<AnnBackend>(in.get<std::uint8_t>());
    s.r_ = in.get<double>();
    s.c_ = in.get<double>();
    s.ids_ = in.vec<std::uint32_t>();
    s.ap_ = ap(in);
    return s;
  }
};

void save_index(const TerminalIndex& index, std::ostream& out) {
  Serializer s;
  s.bytes.append(kIndexMagic, 4);
  s.put(kIndexVersion);
  s.put(config_text(index.config()));
  s.put(index.seed());
  s.put(index.input().matrix());
  s.put(index.sketch().matrix);
  s.put(index.sketch().seed);

  const AannIndex& A = index.aann();
  const PartitionTree& T = A.tree;
  s.put(static_cast<std::uint64_t>(T.n));
  s.put(static_cast<std::uint64_t>(T.total_size));
  s.put(T.seed);
  s.put(T.delta);
  s.put(static_cast<std::uint64_t>(T.nodes.size()));
  for (const auto& node : T.nodes) {
    s.put(node.points);
    s.put(node.r_apx);
    s.put(node.c_low);
    s.put(node.c_high);
    s.put(node.c_rep);
    std::vector<std::uint64_t> children(node.low_children.begin(), node.low_children.end());
    s.put(children);
    s.put(static_cast<std::uint64_t>(node.rep_child));
  }
  s.put(static_cast<std::uint64_t>(A.copies));
  s.put(A.delta);
  s.put(A.seed);
  s.put(static_cast<std::uint64_t>(A.stored));
  for (const auto& node : A.nodes) {
    s.put(node.r_low);
    s.put(node.r_high);
    s.put(node.nu);
    s.put(static_cast<std::uint64_t>(node.ladder));
    s.put(node.block);
    s.put(static_cast<std::uint64_t>(node.phys_lo));
    s.put(static_cast<std::uint64_t>(node.phys_hi));
    s.put(node.center_point);
    s.put(static_cast<std::uint64_t>(node.tables.size()));
    for (const auto& t : node.tables) s.put(t);
  }

  const auto& E = index.ensemble();
  s.put(static_cast<std::uint8_t>(E.has_value()));
  if (E) {
    s.put(static_cast<std::uint64_t>(E->sketches.size()));
    for (const auto& sk : E->sketches) {
      s.put(sk.matrix);
      s.put(sk.seed);
    }
    s.put(static_cast<std::uint64_t>(E->k_prime));
    s.put(E->frobenius_cap);
    for (const auto& P : E->projections) s.put(P);
    s.put(E->query_triples);
    s.put(static_cast<std::uint64_t>(E->query_pairs.size()));
    for (const auto& [a, b] : E->query_pairs) {
      s.put(a);
      s.put(b);
    }
    for (const auto& v : E->pair_defects) s.put(v);
    s.put(E->base_defect);
  }
  s.put(crc64(s.bytes.data(), s.bytes.size()));
  out.write(s.bytes.data(), static_cast<std::streamsize>(s.bytes.size()));
  if (!out) throw IoError("index write failed");
}

void save_index(const TerminalIndex& index, const std::string& path) {
  std::ostringstream buf;
  save_index(index, buf);
  spill(path, buf.str());
}

TerminalIndex load_index(std::istream& stream) {
  std::ostringstream buf;
  buf << stream.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kIndexMagic, 4) != 0) throw IoError("not an index file");
  std::uint64_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 8, 8);
  if (crc64(bytes.data(), bytes.size() - 8) != stored_crc) throw IoError("index checksum mismatch");
  Reader in(std::string_view(bytes).substr(4, bytes.size() - 12));
  if (in.get<std::uint32_t>() != kIndexVersion) throw IoError("unsupported index version");

  TerminalConfig config;
  apply_config_text(config, in.str());
  const auto seed = in.get<std::uint64_t>();
  Matrix X = in.matrix();
  Sketch sketch;
  sketch.matrix = in.matrix();
  sketch.seed = in.get<std::uint64_t>();

  AannIndex A;
  PartitionTree& T = A.tree;
  T.n = in.get<std::uint64_t>();
  T.total_size = in.get<std::uint64_t>();
  T.seed = in.get<std::uint64_t>();
  T.delta = in.get<double>();
  T.nodes.resize(in.length(8));
  for (auto& node : T.nodes) {
    node.points = in.vec<std::uint32_t>();
    node.r_apx = in.get<double>();
    node.c_low = in.partition();
    node.c_high = in.partition();
    node.c_rep = in.vec<std::uint32_t>();
    auto children = in.vec<std::uint64_t>();
    node.low_children.assign(children.begin(), children.end());
    node.rep_child = in.get<std::uint64_t>();
  }
  A.params = config.aann;
  A.copies = in.get<std::uint64_t>();
  A.delta = in.get<double>();
  A.seed = in.get<std::uint64_t>();
  A.stored = in.get<std::uint64_t>();
  A.nodes.resize(T.nodes.size());
  for (auto& node : A.nodes) {
    node.r_low = in.get<double>();
    node.r_high = in.get<double>();
    node.nu = in.get<double>();
    node.ladder = in.get<std::uint64_t>();
    node.block = in.vec<std::uint32_t>();
    node.phys_lo = in.get<std::uint64_t>();
    node.phys_hi = in.get<std::uint64_t>();
    node.center_point = in.get<std::uint32_t>();
    node.tables.resize(in.length(8));
    for (auto& t : node.tables) t = Deserializer::ann(in);
  }

  std::optional<MedianEnsemble> ensemble;
  if (in.get<std::uint8_t>()) {
    MedianEnsemble E;
    E.sketches.resize(in.length(16));
    for (auto& sk : E.sketches) {
      sk.matrix = in.matrix();
      sk.seed = in.get<std::uint64_t>();
    }
    E.k_prime = in.get<std::uint64_t>();
    E.frobenius_cap = in.get<double>();
    E.projections.resize(E.sketches.size());
    for (auto& P : E.projections) P = in.matrix();
    E.query_triples = in.vec<std::array<std::uint32_t, 3>>();
    E.query_pairs.resize(in.length(8));
    for (auto& [a, b] : E.query_pairs) {
      a = in.get<std::uint32_t>();
      b = in.get<std::uint32_t>();
    }
    E.pair_defects.resize(E.sketches.size());
    for (auto& v : E.pair_defects) v = in.vector();
    E.base_defect = in.vector();
    ensemble = std::move(E);
  }
  if (!in.done()) throw IoError("trailing bytes in index");
  if (X.cols() == 0) throw IoError("index holds no points");
  return TerminalIndex::assemble(PointSet(std::move(X)), config, seed, std::move(sketch), std::move(A),
                                 std::move(ensemble));
}

TerminalIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_index(in);
}

}  // namespace temb
