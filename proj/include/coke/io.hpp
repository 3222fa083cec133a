// Text I/O: CSV datasets, flat key = value config files, and the model file.
//
// Model file layout (one token group per line, '#' lines ignored):
//
//   coke-model 1
//   cate <kind>                 kind in {single, difference, average}
//   members <k>                 average only, followed by k cate blocks
//   krr <m> <p>                 one per KRR leaf (difference: f1 then f0)
//   kernel <family> <rho> <amplitude>
//   table <k> r_1 v_1 ... r_k v_k [bound]   custom_table kernels only
//   support <p numbers>         m lines
//   alpha <m numbers>
//   end
//
// Doubles are written in shortest round-trip form, so a read-back model
// predicts bit-identically.
#pragma once

#include "coke/cate.hpp"
#include "coke/core.hpp"
#include "coke/kernel.hpp"
#include "coke/krr.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace coke::io {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) fail(ErrorKind::kInvalidInput, "cannot format number");
  return std::string(buf, end);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline double parse_double_or_throw(std::string_view s, const std::string& where) {
  double v = 0;
  if (!parse_double(s, v)) fail(ErrorKind::kInvalidInput, where + ": '" + std::string(s) + "' is not a number");
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

/// Parsed CSV: header names and numeric rows.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline Table read_csv(std::istream& in, const std::string& name) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (t.header.empty()) {
      t.header = split(line, ',');
      for (const auto& h : t.header)
        if (h.empty()) fail(ErrorKind::kInvalidInput, name + ":" + std::to_string(line_no) + ": empty column name");
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != t.header.size())
      fail(ErrorKind::kInvalidInput, name + ":" + std::to_string(line_no) + ": expected " +
                                         std::to_string(t.header.size()) + " fields, found " +
                                         std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double_or_throw(c, name + ":" + std::to_string(line_no)));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) fail(ErrorKind::kInvalidInput, name + ": missing header row");
  return t;
}

inline Table read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kInvalidInput, "cannot open '" + path + "'");
  return read_csv(in, path);
}

/// Covariate columns z1..zp (p >= 1, contiguous numbering, any position).
inline std::vector<int> covariate_columns(const Table& t, const std::string& name) {
  std::vector<int> cols;
  for (int j = 1;; ++j) {
    const int c = t.column("z" + std::to_string(j));
    if (c < 0) break;
    cols.push_back(c);
  }
  if (cols.empty()) fail(ErrorKind::kInvalidInput, name + ": no covariate columns z1..zp");
  for (const auto& h : t.header)
    if (h.size() > 1 && h[0] == 'z' && h.find_first_not_of("0123456789", 1) == std::string::npos &&
        std::stoul(h.substr(1)) > cols.size())
      fail(ErrorKind::kInvalidInput, name + ": covariate column " + h + " breaks the z1..zp sequence");
  return cols;
}

inline Matrix covariates_from(const Table& t, const std::string& name) {
  const auto cols = covariate_columns(t, name);
  Matrix z(static_cast<Index>(t.rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      z(static_cast<Index>(i), static_cast<Index>(j)) = t.rows[i][static_cast<std::size_t>(cols[j])];
  return z;
}

inline LabeledDataset labeled_from(const Table& t, const std::string& name) {
  const int ca = t.column("a");
  const int cy = t.column("y");
  if (ca < 0) fail(ErrorKind::kInvalidInput, name + ": missing column 'a'");
  if (cy < 0) fail(ErrorKind::kInvalidInput, name + ": missing column 'y'");
  LabeledDataset d;
  d.z = covariates_from(t, name);
  d.a.resize(t.rows.size());
  d.y.resize(static_cast<Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double a = t.rows[i][static_cast<std::size_t>(ca)];
    if (a != 0.0 && a != 1.0)
      fail(ErrorKind::kInvalidInput, name + ": row " + std::to_string(i + 1) + ": treatment must be 0 or 1");
    d.a[i] = static_cast<int>(a);
    d.y(static_cast<Index>(i)) = t.rows[i][static_cast<std::size_t>(cy)];
  }
  d.validate();
  if (d.size() == 0) fail(ErrorKind::kInvalidInput, name + ": no data rows");
  return d;
}

inline UnlabeledDataset unlabeled_from(const Table& t, const std::string& name) {
  UnlabeledDataset d{covariates_from(t, name)};
  if (d.size() == 0) fail(ErrorKind::kInvalidInput, name + ": no data rows");
  d.validate();
  return d;
}

inline void write_labeled_csv(std::ostream& out, const LabeledDataset& d) {
  for (Index j = 0; j < d.dim(); ++j) out << 'z' << (j + 1) << ',';
  out << "a,y\n";
  for (Index i = 0; i < d.size(); ++i) {
    for (Index j = 0; j < d.dim(); ++j) out << format_double(d.z(i, j)) << ',';
    out << d.a[static_cast<std::size_t>(i)] << ',' << format_double(d.y(i)) << '\n';
  }
}

inline void write_covariates_csv(std::ostream& out, const Matrix& z) {
  for (Index j = 0; j < z.cols(); ++j) out << (j ? "," : "") << 'z' << (j + 1);
  out << '\n';
  for (Index i = 0; i < z.rows(); ++i) {
    for (Index j = 0; j < z.cols(); ++j) out << (j ? "," : "") << format_double(z(i, j));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Config

struct ConfigEntry {
  std::string value;
  std::size_t line = 0;
};

/// Flat `key = value` file; '#' starts a comment. Keys not in `known` are
/// rejected, as are duplicates and lines without '='.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& name, const std::vector<std::string>& known) {
    Config cfg;
    cfg.name_ = name;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view view(line);
      if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
      view = trim(view);
      if (view.empty()) continue;
      const auto eq = view.find('=');
      const std::string where = name + ":" + std::to_string(line_no);
      if (eq == std::string_view::npos) fail(ErrorKind::kInvalidInput, where + ": expected 'key = value'");
      const std::string key(trim(view.substr(0, eq)));
      const std::string value(trim(view.substr(eq + 1)));
      if (key.empty()) fail(ErrorKind::kInvalidInput, where + ": empty key");
      if (std::find(known.begin(), known.end(), key) == known.end())
        fail(ErrorKind::kInvalidInput, where + ": unknown key '" + key + "'");
      if (cfg.entries_.count(key)) fail(ErrorKind::kInvalidInput, where + ": duplicate key '" + key + "'");
      cfg.entries_[key] = ConfigEntry{value, line_no};
    }
    return cfg;
  }

  static Config parse_file(const std::string& path, const std::vector<std::string>& known) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kInvalidInput, "cannot open config '" + path + "'");
    return parse(in, path, known);
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second.value;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    return parse_double_or_throw(it->second.value, where(it->second));
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::int64_t v = 0;
    const auto& s = it->second.value;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      fail(ErrorKind::kInvalidInput, where(it->second) + ": '" + s + "' is not an integer");
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::uint64_t v = 0;
    const auto& s = it->second.value;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      fail(ErrorKind::kInvalidInput, where(it->second) + ": '" + s + "' is not an unsigned integer");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const auto& s = it->second.value;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(ErrorKind::kInvalidInput, where(it->second) + ": '" + s + "' is not a boolean");
  }

  std::vector<double> get_doubles(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return {};
    std::vector<double> out;
    for (const auto& part : split(it->second.value, ','))
      out.push_back(parse_double_or_throw(part, where(it->second)));
    return out;
  }

  std::vector<std::string> get_list(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return {};
    return split(it->second.value, ',');
  }

  /// "file:line" for diagnostics about a key's value.
  std::string where(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? name_ : where(it->second);
  }

 private:
  std::string where(const ConfigEntry& e) const { return name_ + ":" + std::to_string(e.line); }

  std::string name_;
  std::map<std::string, ConfigEntry> entries_;
};

// ---------------------------------------------------------------------------
// Model file

namespace detail {

inline void write_krr(std::ostream& out, const KrrModel& m) {
  const KernelSpec& k = m.spec();
  out << "krr " << m.support().rows() << ' ' << m.support().cols() << '\n';
  out << "kernel " << to_string(k.family()) << ' ' << format_double(k.rho()) << ' ' << format_double(k.amplitude())
      << '\n';
  if (k.table()) {
    const auto& t = *k.table();
    out << "table " << t.radii.size();
    for (std::size_t i = 0; i < t.radii.size(); ++i)
      out << ' ' << format_double(t.radii[i]) << ' ' << format_double(t.values[i]);
    if (t.declared_bound) out << ' ' << format_double(*t.declared_bound);
    out << '\n';
  }
  for (Index i = 0; i < m.support().rows(); ++i) {
    out << "support";
    for (Index j = 0; j < m.support().cols(); ++j) out << ' ' << format_double(m.support()(i, j));
    out << '\n';
  }
  out << "alpha";
  for (Index i = 0; i < m.dual_weights().size(); ++i) out << ' ' << format_double(m.dual_weights()(i));
  out << '\n';
}

inline void write_cate(std::ostream& out, const CateModel& model) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, CateModel::Difference>) {
          out << "cate difference\n";
          write_krr(out, n.f1);
          write_krr(out, n.f0);
        } else if constexpr (std::is_same_v<T, CateModel::Single>) {
          out << "cate single\n";
          write_krr(out, n.h);
        } else {
          out << "cate average\nmembers " << n.members.size() << '\n';
          for (const auto& m : n.members) write_cate(out, m);
        }
      },
      model.node());
}

class TokenReader {
 public:
  TokenReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  /// Next non-comment, non-blank line split on whitespace.
  std::vector<std::string> line(std::string_view expected_tag) {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_no_;
      const auto t = trim(raw);
      if (t.empty() || t.front() == '#') continue;
      std::istringstream ss{std::string(t)};
      std::vector<std::string> tokens;
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      if (tokens.front() != expected_tag) error("expected '" + std::string(expected_tag) + "', found '" + tokens.front() + "'");
      return tokens;
    }
    error("unexpected end of file, expected '" + std::string(expected_tag) + "'");
  }

  double number(const std::string& s) { return parse_double_or_throw(s, where()); }

  Index count(const std::string& s) {
    const double v = number(s);
    if (v < 0 || v != std::floor(v)) error("'" + s + "' is not a count");
    return static_cast<Index>(v);
  }

  [[noreturn]] void error(const std::string& what) const { fail(ErrorKind::kInvalidInput, where() + ": " + what); }
  std::string where() const { return name_ + ":" + std::to_string(line_no_); }

 private:
  std::istream& in_;
  std::string name_;
  std::size_t line_no_ = 0;
};

inline KrrModel read_krr(TokenReader& r) {
  auto head = r.line("krr");
  if (head.size() != 3) r.error("krr line needs <m> <p>");
  const Index m = r.count(head[1]);
  const Index p = r.count(head[2]);
  auto kline = r.line("kernel");
  if (kline.size() != 4) r.error("kernel line needs <family> <rho> <amplitude>");
  const KernelFamily family = parse_kernel_family(kline[1]);
  const double rho = r.number(kline[2]);
  const double amplitude = r.number(kline[3]);
  std::optional<KernelSpec> spec;
  if (family == KernelFamily::kMaternExp) {
    spec = KernelSpec::matern_exp(rho, amplitude);
  } else if (family == KernelFamily::kGaussian) {
    spec = KernelSpec::gaussian(rho, amplitude);
  } else {
    auto t = r.line("table");
    if (t.size() < 2) r.error("table line needs a knot count");
    const Index k = r.count(t[1]);
    const auto expected = static_cast<std::size_t>(2 + 2 * k);
    if (t.size() != expected && t.size() != expected + 1) r.error("table line has the wrong number of fields");
    RadialTable table;
    for (Index i = 0; i < k; ++i) {
      table.radii.push_back(r.number(t[static_cast<std::size_t>(2 + 2 * i)]));
      table.values.push_back(r.number(t[static_cast<std::size_t>(3 + 2 * i)]));
    }
    if (t.size() == expected + 1) table.declared_bound = r.number(t.back());
    spec = KernelSpec::custom_table(std::move(table), rho);
  }
  auto support = std::make_shared<Matrix>(m, p);
  for (Index i = 0; i < m; ++i) {
    auto row = r.line("support");
    if (static_cast<Index>(row.size()) != p + 1) r.error("support line has the wrong number of values");
    for (Index j = 0; j < p; ++j) (*support)(i, j) = r.number(row[static_cast<std::size_t>(j + 1)]);
  }
  auto a = r.line("alpha");
  if (static_cast<Index>(a.size()) != m + 1) r.error("alpha line has the wrong number of values");
  Vector alpha(m);
  for (Index i = 0; i < m; ++i) alpha(i) = r.number(a[static_cast<std::size_t>(i + 1)]);
  return KrrModel(*spec, std::move(support), std::move(alpha));
}

inline CateModel read_cate(TokenReader& r, int depth = 0) {
  if (depth > 32) r.error("model nesting too deep");
  auto head = r.line("cate");
  if (head.size() != 2) r.error("cate line needs a kind");
  if (head[1] == "single") return CateModel::single(read_krr(r));
  if (head[1] == "difference") {
    KrrModel f1 = read_krr(r);
    KrrModel f0 = read_krr(r);
    return CateModel::difference(std::move(f1), std::move(f0));
  }
  if (head[1] == "average") {
    auto mem = r.line("members");
    if (mem.size() != 2) r.error("members line needs a count");
    const Index k = r.count(mem[1]);
    if (k < 1) r.error("average needs at least one member");
    std::vector<CateModel> members;
    for (Index i = 0; i < k; ++i) members.push_back(read_cate(r, depth + 1));
    return CateModel::average(std::move(members));
  }
  r.error("unknown cate kind '" + head[1] + "'");
}

}  // namespace detail

inline constexpr int kModelFormatVersion = 1;

/// Writes the model. The first line is a free-form version header.
inline void write_model(std::ostream& out, const CateModel& model, std::string_view header_comment = "") {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "coke-model " << kModelFormatVersion << '\n';
  detail::write_cate(out, model);
  out << "end\n";
}

inline CateModel read_model(std::istream& in, const std::string& name = "model") {
  detail::TokenReader r(in, name);
  auto head = r.line("coke-model");
  if (head.size() != 2 || head[1] != std::to_string(kModelFormatVersion))
    r.error("unsupported model format version");
  CateModel model = detail::read_cate(r);
  r.line("end");
  return model;
}

inline CateModel read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kInvalidInput, "cannot open model '" + path + "'");
  return read_model(in, path);
}

}  // namespace coke::io
