#include "gasrom/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace gasrom {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// ---------------------------------------------------------------- text helpers

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

double parse_double(const std::string& tok, const std::string& where) {
  const char* b = tok.c_str();
  char* e = nullptr;
  const double v = std::strtod(b, &e);
  if (tok.empty() || e == b || *e != '\0') throw SchemaError(where + ": '" + tok + "' is not a number");
  return v;
}

long parse_count(const std::string& tok, const std::string& where) {
  const double v = parse_double(tok, where);
  if (v < 0 || v != static_cast<double>(static_cast<long>(v))) {
    throw SchemaError(where + ": expected a non-negative integer, got '" + tok + "'");
  }
  return static_cast<long>(v);
}

std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot open " + p.string() + " for writing");
  return out;
}

void write_row(std::ostream& out, const Matrix& M, Index row) {
  for (Index c = 0; c < M.cols(); ++c) out << (c ? "," : "") << format_double(M(row, c));
  out << '\n';
}

// ---------------------------------------------------------------- binary helpers

class BinWriter {
 public:
  explicit BinWriter(const fs::path& p) : out_(open_out(p, true)) {}
  void raw(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
  template <typename T>
  void pod(T v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void doubles(const double* p, Index n) { raw(p, sizeof(double) * static_cast<std::size_t>(n)); }
  void finish(const fs::path& p) {
    out_.flush();
    if (!out_) throw Error("write failed: " + p.string());
  }

 private:
  std::ofstream out_;
};

class BinReader {
 public:
  explicit BinReader(const fs::path& p) : name_(p.filename().string()) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw SchemaError(name_ + ": cannot open");
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  void raw(void* dst, std::size_t n, const char* field) {
    if (pos_ + n > buf_.size()) {
      throw SchemaError(name_ + ": truncated while reading " + field + " at byte offset " + std::to_string(pos_));
    }
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod(const char* field) {
    T v;
    raw(&v, sizeof v, field);
    return v;
  }
  std::string str(const char* field) {
    const auto n = pod<std::uint32_t>(field);
    if (n > buf_.size()) throw SchemaError(name_ + ": implausible string length for " + field + " at byte offset " + std::to_string(pos_));
    std::string s(n, '\0');
    raw(s.data(), n, field);
    return s;
  }
  void doubles(double* dst, Index n, const char* field) { raw(dst, sizeof(double) * static_cast<std::size_t>(n), field); }
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == buf_.size(); }
  const std::string& name() const { return name_; }
  std::size_t size() const { return buf_.size(); }

 private:
  std::string name_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

constexpr char kDatasetMagic[8] = {'G', 'A', 'S', 'R', 'O', 'M', 'D', '\0'};
constexpr char kModelMagic[8] = {'G', 'A', 'S', 'R', 'O', 'M', 'M', '\0'};
constexpr std::uint32_t kVersion = 1;

void require_uniform(const Vector& t, const std::string& where) {
  const Index N = t.size();
  if (N < 2) return;
  const double h = (t[N - 1] - t[0]) / static_cast<double>(N - 1);
  for (Index i = 1; i < N; ++i) {
    if (!(t[i] > t[i - 1])) throw SchemaError(where + ": times must be strictly increasing (index " + std::to_string(i) + ")");
    if (std::abs((t[i] - t[i - 1]) - h) > 1e-9 * std::max(1.0, std::abs(h))) {
      throw SchemaError(where + ": sample grid is not uniform (index " + std::to_string(i) + ")");
    }
  }
}

// ---------------------------------------------------------------- dataset: text

void write_text(const fs::path& dir, const SnapshotDataset& d) {
  const Index n = d.n(), m = d.m(), p = d.p(), N = d.num_samples();
  const bool xdot = d.trajectories[0].Xdot.size() > 0;
  std::ofstream meta = open_out(dir / "meta.txt");
  meta << "# snapshot dataset\n";
  meta << "format = gasrom-dataset\nversion = " << kVersion << "\n";
  meta << "n = " << n << "\nm = " << m << "\np = " << p << "\n";
  meta << "trajectories = " << d.size() << "\nsamples = " << N << "\n";
  meta << "weight_convention = " << d.weight_convention << "\n";
  meta << "output_map = " << (d.output_map ? "output_map.csv" : "identity") << "\n";
  meta << "derivatives = " << (xdot ? "stored" : "none") << "\n";
  meta << "times =";
  for (Index i = 0; i < N; ++i) meta << ' ' << format_double(d.times[i]);
  meta << "\n";
  for (Index k = 0; k < d.size(); ++k) {
    const auto& t = d.trajectories[k];
    meta << "weight." << k << " = " << format_double(t.weight) << "\n";
    meta << "input." << k << " = " << t.input.to_text() << "\n";
    if (t.x0 != t.X.col(0)) {
      meta << "x0." << k << " =";
      for (Index i = 0; i < n; ++i) meta << ' ' << format_double(t.x0[i]);
      meta << "\n";
    }
  }
  if (!meta) throw Error("write failed: meta.txt");
  if (d.output_map) write_matrix_csv(dir / "output_map.csv", *d.output_map);

  for (Index k = 0; k < d.size(); ++k) {
    const auto& t = d.trajectories[k];
    std::ofstream out = open_out(dir / ("traj_" + std::to_string(k) + ".csv"));
    out << "t";
    for (Index i = 1; i <= n; ++i) out << ",x_" << i;
    for (Index i = 1; i <= m; ++i) out << ",u_" << i;
    for (Index i = 1; i <= p; ++i) out << ",y_" << i;
    out << "\n";
    Matrix rows(N, 1 + n + m + p);
    rows.col(0) = d.times;
    rows.middleCols(1, n) = t.X.transpose();
    rows.middleCols(1 + n, m) = t.U.transpose();
    rows.middleCols(1 + n + m, p) = t.Y.transpose();
    for (Index i = 0; i < N; ++i) write_row(out, rows, i);
    if (!out) throw Error("write failed: traj_" + std::to_string(k) + ".csv");
    if (xdot) {
      std::ofstream dx = open_out(dir / ("xdot_" + std::to_string(k) + ".csv"));
      dx << "t";
      for (Index i = 1; i <= n; ++i) dx << ",xdot_" << i;
      dx << "\n";
      Matrix r2(N, 1 + n);
      r2.col(0) = d.times;
      r2.rightCols(n) = t.Xdot.transpose();
      for (Index i = 0; i < N; ++i) write_row(dx, r2, i);
    }
  }
}

struct CsvTable {
  std::vector<std::string> header;
  Matrix rows;  // N x columns
};

CsvTable read_csv_table(const fs::path& p) {
  std::ifstream in(p);
  const std::string name = p.filename().string();
  if (!in) throw SchemaError(name + ": missing file");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(name + ": empty file (expected a header row)");
  t.header = split(trim(line), ',');
  std::vector<std::vector<double>> vals;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != t.header.size()) {
      throw SchemaError(name + " line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      row.push_back(parse_double(cells[c], name + " line " + std::to_string(lineno) + " field " + t.header[c]));
    }
    vals.push_back(std::move(row));
  }
  t.rows.resize(static_cast<Index>(vals.size()), static_cast<Index>(t.header.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    for (std::size_t c = 0; c < vals[i].size(); ++c) t.rows(static_cast<Index>(i), static_cast<Index>(c)) = vals[i][c];
  return t;
}

std::vector<double> parse_list(const std::string& v, const std::string& where) {
  std::istringstream in(v);
  std::vector<double> out;
  for (std::string tok; in >> tok;) out.push_back(parse_double(tok, where));
  return out;
}

SnapshotDataset read_text(const fs::path& dir) {
  const fs::path mp = dir / "meta.txt";
  std::ifstream in(mp);
  if (!in) throw SchemaError("meta.txt: missing in " + dir.string());
  std::map<std::string, std::pair<std::string, long>> kv;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw SchemaError("meta.txt line " + std::to_string(lineno) + ": expected 'key = value'");
    kv[trim(s.substr(0, eq))] = {trim(s.substr(eq + 1)), lineno};
  }
  auto get = [&](const std::string& key) -> std::pair<std::string, std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) throw SchemaError("meta.txt: missing field '" + key + "'");
    return {it->second.first, "meta.txt line " + std::to_string(it->second.second) + " field " + key};
  };
  auto count = [&](const std::string& key) {
    const auto [v, where] = get(key);
    return static_cast<Index>(parse_count(v, where));
  };
  if (get("format").first != "gasrom-dataset") throw SchemaError(get("format").second + ": unknown format");
  const Index n = count("n"), m = count("m"), p = count("p"), K = count("trajectories"), N = count("samples");
  if (K == 0) throw SchemaError("meta.txt: no trajectories");
  if (n == 0 || p == 0 || N == 0) throw SchemaError("meta.txt: n, p and samples must be positive");

  SnapshotDataset d;
  d.weight_convention = get("weight_convention").first;
  {
    const auto [v, where] = get("times");
    const auto t = parse_list(v, where);
    if (static_cast<Index>(t.size()) != N) {
      throw SchemaError(where + ": expected " + std::to_string(N) + " times, found " + std::to_string(t.size()));
    }
    d.times = Eigen::Map<const Vector>(t.data(), N);
    require_uniform(d.times, where);
  }
  {
    const auto [v, where] = get("output_map");
    if (v != "identity") {
      Matrix C = read_matrix_csv(dir / v);
      if (C.rows() != p || C.cols() != n) throw SchemaError(v + ": output map must be " + std::to_string(p) + " x " + std::to_string(n));
      d.output_map = std::move(C);
    } else if (p != n) {
      throw SchemaError(where + ": identity output map needs p == n");
    }
  }
  const bool xdot = get("derivatives").first == "stored";

  Vector grid0;
  for (Index k = 0; k < K; ++k) {
    const std::string fname = "traj_" + std::to_string(k) + ".csv";
    const CsvTable tab = read_csv_table(dir / fname);
    if (static_cast<Index>(tab.header.size()) != 1 + n + m + p) {
      throw SchemaError(fname + " line 1: expected " + std::to_string(1 + n + m + p) + " columns (t, x, u, y)");
    }
    if (tab.header[0] != "t") throw SchemaError(fname + " line 1: first column must be 't'");
    if (tab.rows.rows() != N) {
      throw SchemaError(fname + ": expected " + std::to_string(N) + " samples, found " + std::to_string(tab.rows.rows()));
    }
    const Vector tk = tab.rows.col(0);
    const Vector& ref = k == 0 ? d.times : grid0;
    for (Index i = 0; i < N; ++i) {
      if (tk[i] != ref[i]) {
        throw SchemaError(fname + " line " + std::to_string(i + 2) + ": sample grid differs from " +
                          (k == 0 ? std::string("meta.txt times") : std::string("traj_0.csv")) + " (" +
                          format_double(tk[i]) + " vs " + format_double(ref[i]) + ")");
      }
    }
    if (k == 0) grid0 = tk;
    SnapshotTrajectory t;
    t.X = tab.rows.middleCols(1, n).transpose();
    t.U = tab.rows.middleCols(1 + n, m).transpose();
    t.Y = tab.rows.middleCols(1 + n + m, p).transpose();
    t.x0 = t.X.col(0);
    if (kv.count("x0." + std::to_string(k))) {
      const auto [v, where] = get("x0." + std::to_string(k));
      const auto x0 = parse_list(v, where);
      if (static_cast<Index>(x0.size()) != n) throw SchemaError(where + ": expected n entries");
      t.x0 = Eigen::Map<const Vector>(x0.data(), n);
    }
    {
      const auto [v, where] = get("weight." + std::to_string(k));
      t.weight = parse_double(v, where);
      if (!(t.weight > 0)) throw SchemaError(where + ": weight must be positive");
    }
    if (kv.count("input." + std::to_string(k)) && get("input." + std::to_string(k)).first != "sampled") {
      t.input = InputSignal::from_text(get("input." + std::to_string(k)).first);
    } else {
      t.input = InputSignal::sampled(d.times, t.U);
    }
    if (xdot) {
      const std::string dn = "xdot_" + std::to_string(k) + ".csv";
      const CsvTable dt = read_csv_table(dir / dn);
      if (static_cast<Index>(dt.header.size()) != 1 + n || dt.rows.rows() != N) {
        throw SchemaError(dn + ": expected " + std::to_string(N) + " rows of t and n derivatives");
      }
      t.Xdot = dt.rows.rightCols(n).transpose();
    }
    d.trajectories.push_back(std::move(t));
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------- dataset: binary
//
// offset 0   8 bytes  magic "GASROMD\0"
//        8   uint32   version
//       12   uint64   n, m, p, trajectories K, samples N
//       52   uint8    has_output_map, has_xdot
//       54   float64  times[N], then output map (p x n, column-major) if present
//                     string weight_convention (uint32 length + bytes)
//  per trajectory: float64 weight; string input; float64 x0[n], X[n N], U[m N],
//                  Y[p N], Xdot[n N] if present (all column-major)

void write_binary(const fs::path& dir, const SnapshotDataset& d) {
  const fs::path p = dir / "dataset.bin";
  BinWriter w(p);
  const bool xdot = d.trajectories[0].Xdot.size() > 0;
  w.raw(kDatasetMagic, 8);
  w.pod(kVersion);
  for (Index v : {d.n(), d.m(), d.p(), d.size(), d.num_samples()}) w.pod<std::uint64_t>(static_cast<std::uint64_t>(v));
  w.pod<std::uint8_t>(d.output_map ? 1 : 0);
  w.pod<std::uint8_t>(xdot ? 1 : 0);
  w.doubles(d.times.data(), d.times.size());
  if (d.output_map) w.doubles(d.output_map->data(), d.output_map->size());
  w.str(d.weight_convention);
  for (const auto& t : d.trajectories) {
    w.pod(t.weight);
    w.str(t.input.to_text());
    w.doubles(t.x0.data(), t.x0.size());
    w.doubles(t.X.data(), t.X.size());
    w.doubles(t.U.data(), t.U.size());
    w.doubles(t.Y.data(), t.Y.size());
    if (xdot) w.doubles(t.Xdot.data(), t.Xdot.size());
  }
  w.finish(p);
}

SnapshotDataset read_binary(const fs::path& dir) {
  BinReader r(dir / "dataset.bin");
  char magic[8];
  r.raw(magic, 8, "magic");
  if (std::memcmp(magic, kDatasetMagic, 8) != 0) throw SchemaError(r.name() + ": bad magic at byte offset 0");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kVersion) throw SchemaError(r.name() + ": unsupported version " + std::to_string(version) + " at byte offset 8");
  Index dims[5];
  const char* names[5] = {"n", "m", "p", "trajectories", "samples"};
  for (int i = 0; i < 5; ++i) {
    const auto v = r.pod<std::uint64_t>(names[i]);
    if (v > (1ull << 32)) throw SchemaError(r.name() + ": implausible " + std::string(names[i]) + " before byte offset " + std::to_string(r.offset()));
    dims[i] = static_cast<Index>(v);
  }
  const auto [n, m, p, K, N] = std::tuple{dims[0], dims[1], dims[2], dims[3], dims[4]};
  if (K == 0) throw SchemaError(r.name() + ": no trajectories");
  const bool has_c = r.pod<std::uint8_t>("has_output_map") != 0;
  const bool xdot = r.pod<std::uint8_t>("has_xdot") != 0;
  const std::size_t need = static_cast<std::size_t>(N + (has_c ? p * n : 0) +
                                                    K * (1 + n + n * N + m * N + p * N + (xdot ? n * N : 0))) * 8;
  if (need > r.size()) throw SchemaError(r.name() + ": file too short for the declared dimensions");
  SnapshotDataset d;
  d.times.resize(N);
  r.doubles(d.times.data(), N, "times");
  require_uniform(d.times, r.name() + " field times");
  if (has_c) {
    Matrix C(p, n);
    r.doubles(C.data(), C.size(), "output_map");
    d.output_map = std::move(C);
  }
  d.weight_convention = r.str("weight_convention");
  for (Index k = 0; k < K; ++k) {
    SnapshotTrajectory t;
    t.weight = r.pod<double>("weight");
    const std::string in = r.str("input");
    t.x0.resize(n);
    r.doubles(t.x0.data(), n, "x0");
    t.X.resize(n, N);
    r.doubles(t.X.data(), t.X.size(), "X");
    t.U.resize(m, N);
    r.doubles(t.U.data(), t.U.size(), "U");
    t.Y.resize(p, N);
    r.doubles(t.Y.data(), t.Y.size(), "Y");
    if (xdot) {
      t.Xdot.resize(n, N);
      r.doubles(t.Xdot.data(), t.Xdot.size(), "Xdot");
    }
    t.input = in == "sampled" ? InputSignal::sampled(d.times, t.U) : InputSignal::from_text(in);
    d.trajectories.push_back(std::move(t));
  }
  if (!r.at_end()) throw SchemaError(r.name() + ": trailing bytes at offset " + std::to_string(r.offset()));
  d.validate();
  return d;
}

}  // namespace

void write_matrix_csv(const fs::path& path, const Matrix& M) {
  std::ofstream out = open_out(path);
  for (Index i = 0; i < M.rows(); ++i) write_row(out, M, i);
  if (!out) throw Error("write failed: " + path.string());
}

Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  const std::string name = path.filename().string();
  if (!in) throw SchemaError(name + ": missing file");
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    const auto cells = split(trim(line), ',');
    for (std::size_t c = 0; c < cells.size(); ++c) {
      row.push_back(parse_double(cells[c], name + " line " + std::to_string(lineno) + " column " + std::to_string(c + 1)));
    }
    if (!rows.empty() && row.size() != rows[0].size()) {
      throw SchemaError(name + " line " + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  Matrix M(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) M(i, j) = rows[i][j];
  return M;
}

void write_dataset(const fs::path& dir, const SnapshotDataset& d, DatasetFormat format) {
  d.validate();
  fs::create_directories(dir);
  if (format == DatasetFormat::kBinary) {
    write_binary(dir, d);
  } else {
    write_text(dir, d);
  }
}

SnapshotDataset pre_project(const SnapshotDataset& d, Index k, Matrix* basis) {
  d.validate();
  const PodBasis b = pod(d, std::min<Index>(k, std::min(d.n(), d.num_samples() * d.size())));
  const Matrix& V = b.modes;
  SnapshotDataset out = d;
  out.output_map = d.output_map ? Matrix(*d.output_map * V) : V;
  for (auto& t : out.trajectories) {
    t.X = V.transpose() * t.X;
    t.x0 = V.transpose() * t.x0;
    if (t.Xdot.size() > 0) t.Xdot = V.transpose() * t.Xdot;
  }
  if (basis) *basis = V;
  return out;
}

SnapshotDataset read_dataset(const fs::path& dir, const DatasetReadOptions& opts) {
  if (!fs::is_directory(dir)) throw SchemaError(dir.string() + ": dataset directory not found");
  SnapshotDataset d = fs::exists(dir / "dataset.bin") ? read_binary(dir) : read_text(dir);
  Index k = opts.pre_project;
  if (k < 0) k = d.n() > 200 ? 200 : 0;
  if (k > 0 && k < d.n()) d = pre_project(d, k, opts.projection_basis);
  return d;
}

// ---------------------------------------------------------------- model file
//
// offset 0  8 bytes magic "GASROMM\0"; uint32 version
//           uint32 count, then count (key, value) strings
//           uint32 count, then count arrays: string name, uint32 ndim,
//           uint64 dims[ndim], float64 data (column-major; tensors (i,j,k)
//           at i + d1 (j + d2 k))

namespace {

struct Array {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

void put_array(BinWriter& w, const std::string& name, const std::vector<std::uint64_t>& dims, const double* p,
               Index size) {
  w.str(name);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) w.pod(d);
  w.doubles(p, size);
}

void put_matrix(BinWriter& w, const std::string& name, const Matrix& M) {
  put_array(w, name, {static_cast<std::uint64_t>(M.rows()), static_cast<std::uint64_t>(M.cols())}, M.data(), M.size());
}

void put_tensor(BinWriter& w, const std::string& name, const Tensor3& T) {
  put_array(w, name,
            {static_cast<std::uint64_t>(T.dim1()), static_cast<std::uint64_t>(T.dim2()),
             static_cast<std::uint64_t>(T.dim3())},
            T.flat().data(), T.size());
}

Matrix get_matrix(const std::map<std::string, Array>& arrays, const std::string& name, const std::string& file) {
  const auto it = arrays.find(name);
  if (it == arrays.end()) throw SchemaError(file + ": missing array '" + name + "'");
  if (it->second.dims.size() != 2) throw SchemaError(file + ": array '" + name + "' must be 2-dimensional");
  return Eigen::Map<const Matrix>(it->second.data.data(), static_cast<Index>(it->second.dims[0]),
                                  static_cast<Index>(it->second.dims[1]));
}

Tensor3 get_tensor(const std::map<std::string, Array>& arrays, const std::string& name, const std::string& file) {
  const auto it = arrays.find(name);
  if (it == arrays.end()) throw SchemaError(file + ": missing array '" + name + "'");
  const auto& dm = it->second.dims;
  if (dm.size() != 3) throw SchemaError(file + ": array '" + name + "' must be 3-dimensional");
  Tensor3 T(static_cast<Index>(dm[0]), static_cast<Index>(dm[1]), static_cast<Index>(dm[2]));
  T.flat() = Eigen::Map<const Vector>(it->second.data.data(), T.size());
  return T;
}

}  // namespace

void save_model(const fs::path& path, const RomModel& m, const std::map<std::string, std::string>& meta,
                bool csv_twins) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::map<std::string, std::string> md = meta;
  md["format"] = "gasrom-model";
  md["dynamics"] = m.dynamics().is_stable() ? "stable" : "raw";
  md["n"] = std::to_string(m.n());
  md["r"] = std::to_string(m.r());
  md["m"] = std::to_string(m.m());
  md["p"] = std::to_string(m.p());
  BinWriter w(path);
  w.raw(kModelMagic, 8);
  w.pod(kVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(md.size()));
  for (const auto& [k, v] : md) {
    w.str(k);
    w.str(v);
  }
  std::vector<std::pair<std::string, Matrix>> mats = {{"phi", m.projection().phi()}, {"psi", m.projection().psi()}};
  if (m.output_map()) mats.push_back({"C", *m.output_map()});
  std::vector<std::pair<std::string, const Tensor3*>> tens;
  if (m.dynamics().is_stable()) {
    const auto& p = m.dynamics().params();
    mats.push_back({"K", p.K});
    mats.push_back({"R", p.R});
    mats.push_back({"Q", p.Q});
    mats.push_back({"B", p.B});
    tens.push_back({"S", &p.S});
  } else {
    mats.push_back({"A", m.dynamics().A()});
    mats.push_back({"B", m.dynamics().B()});
    tens.push_back({"H", &m.dynamics().H()});
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(mats.size() + tens.size()));
  for (const auto& [name, M] : mats) put_matrix(w, name, M);
  for (const auto& [name, T] : tens) put_tensor(w, name, *T);
  w.finish(path);

  if (csv_twins) {
    const fs::path dir = path.string() + ".csv";
    fs::create_directories(dir);
    for (const auto& [name, M] : mats) write_matrix_csv(dir / (name + ".csv"), M);
    for (const auto& [name, T] : tens) write_matrix_csv(dir / (name + "_unfolded.csv"), T->unfolded());
    std::ofstream mt = open_out(dir / "meta.txt");
    for (const auto& [k, v] : md) mt << k << " = " << v << "\n";
  }
}

ModelFile load_model(const fs::path& path) {
  BinReader r(path);
  char magic[8];
  r.raw(magic, 8, "magic");
  if (std::memcmp(magic, kModelMagic, 8) != 0) throw SchemaError(r.name() + ": not a model file (bad magic at byte offset 0)");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kVersion) throw SchemaError(r.name() + ": unsupported version " + std::to_string(version));
  ModelFile out;
  const auto nmeta = r.pod<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str("metadata key");
    out.meta[k] = r.str("metadata value");
  }
  std::map<std::string, Array> arrays;
  const auto narr = r.pod<std::uint32_t>("array count");
  for (std::uint32_t i = 0; i < narr; ++i) {
    const std::string name = r.str("array name");
    const auto ndim = r.pod<std::uint32_t>("array rank");
    if (ndim < 1 || ndim > 3) throw SchemaError(r.name() + ": array '" + name + "' has unsupported rank at byte offset " + std::to_string(r.offset()));
    Array a;
    std::uint64_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      a.dims.push_back(r.pod<std::uint64_t>("array dimension"));
      total *= a.dims.back();
    }
    if (total * 8 > r.size()) throw SchemaError(r.name() + ": array '" + name + "' exceeds the file size");
    a.data.resize(total);
    r.doubles(a.data.data(), static_cast<Index>(total), name.c_str());
    arrays[name] = std::move(a);
  }
  if (!r.at_end()) throw SchemaError(r.name() + ": trailing bytes at offset " + std::to_string(r.offset()));

  const std::string file = r.name();
  std::optional<Matrix> C;
  if (arrays.count("C")) C = get_matrix(arrays, "C", file);
  ProjectionPair pp(get_matrix(arrays, "phi", file), get_matrix(arrays, "psi", file));
  const auto dyn = out.meta.find("dynamics");
  if (dyn == out.meta.end()) throw SchemaError(file + ": missing metadata 'dynamics'");
  if (dyn->second == "stable") {
    StableLatentParams p{get_matrix(arrays, "K", file), get_matrix(arrays, "R", file), get_matrix(arrays, "Q", file),
                         get_tensor(arrays, "S", file), get_matrix(arrays, "B", file)};
    out.model = RomModel(std::move(pp), LatentDynamics::stable(std::move(p)), C);
    const Matrix& A = out.model.dynamics().A();
    const double a = spectral_abscissa(A);
    if (!(a < -1e-12 * A.norm())) {
      throw SchemaError(file + ": stable model whose assembled A is not Hurwitz (spectral abscissa " + format_double(a) + ")");
    }
  } else if (dyn->second == "raw") {
    out.model = RomModel(std::move(pp),
                         LatentDynamics::raw(get_matrix(arrays, "A", file), get_tensor(arrays, "H", file),
                                             get_matrix(arrays, "B", file)),
                         C);
  } else {
    throw SchemaError(file + ": metadata 'dynamics' must be stable or raw");
  }
  return out;
}

}  // namespace gasrom
