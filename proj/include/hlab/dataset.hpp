#pragma once

// Labeled tabular datasets: loading (CSV / ARFF-style text), saving,
// stratified repeated cross-validation plans, a synthetic two-Gaussian
// generator with label noise, and fold-local imputation / encoding.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hlab/core.hpp"

namespace hlab {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

enum class AttributeKind { numeric, categorical };

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::numeric;
  std::vector<std::string> categories;  // categorical only

  bool operator==(const Attribute&) const = default;
};

/// Feature values are stored as doubles: numeric values directly, categorical
/// values as their category code, missing values as NaN.
struct Instance {
  int id = 0;
  std::vector<double> x;
  int label = 0;

  bool operator==(const Instance& o) const {
    if (id != o.id || label != o.label || x.size() != o.x.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (is_missing(x[i]) != is_missing(o.x[i])) return false;
      if (!is_missing(x[i]) && x[i] != o.x[i]) return false;
    }
    return true;
  }
};

struct LabelFlip {
  int instance_id = 0;
  int original_label = 0;
  bool operator==(const LabelFlip&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<Attribute> attributes;
  std::string class_attribute = "class";
  std::vector<std::string> classes;
  std::vector<Instance> instances;
  /// Labels flipped by the synthetic generator (sidecar metadata).
  std::vector<LabelFlip> flips;

  std::size_t size() const noexcept { return instances.size(); }
  std::size_t arity() const noexcept { return attributes.size(); }
  int num_classes() const noexcept { return static_cast<int>(classes.size()); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(classes.size(), 0);
    for (const auto& in : instances) ++counts[static_cast<std::size_t>(in.label)];
    return counts;
  }

  int distinct_labels() const {
    const auto counts = class_counts();
    return static_cast<int>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  }

  std::vector<int> ids() const {
    std::vector<int> out;
    out.reserve(instances.size());
    for (const auto& in : instances) out.push_back(in.id);
    return out;
  }

  /// Same schema, the instances at `positions` in the given order. Instance
  /// ids are kept, so a subset's ids need not be 0..N-1.
  Dataset subset(std::span<const std::size_t> positions) const {
    Dataset out;
    out.name = name;
    out.attributes = attributes;
    out.class_attribute = class_attribute;
    out.classes = classes;
    out.instances.reserve(positions.size());
    for (auto p : positions) out.instances.push_back(instances.at(p));
    return out;
  }

  /// Schema copy with no instances.
  Dataset empty_like() const { return subset(std::span<const std::size_t>{}); }

  bool operator==(const Dataset&) const = default;
};

/// Throws if the instance does not conform to the dataset's schema.
inline void check_conforms(const Dataset& ds, std::span<const double> x) {
  if (x.size() != ds.arity())
    throw Error("arity mismatch: expected " + std::to_string(ds.arity()) + " features, got " +
                std::to_string(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& a = ds.attributes[j];
    if (a.kind != AttributeKind::categorical || is_missing(x[j])) continue;
    const double v = x[j];
    if (v < 0 || v >= static_cast<double>(a.categories.size()) || v != std::floor(v))
      throw Error("invalid category code for attribute '" + a.name + "'");
  }
}

/// Validates the Dataset invariants. `dense_ids` additionally requires ids
/// 0..N-1 in order (true for loaded and generated datasets).
inline void validate(const Dataset& ds, bool dense_ids = true) {
  if (ds.classes.size() < 2) throw Error("dataset declares fewer than 2 classes");
  std::set<int> seen;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& in = ds.instances[i];
    check_conforms(ds, in.x);
    if (in.label < 0 || in.label >= ds.num_classes()) throw Error("invalid class code");
    if (!seen.insert(in.id).second) throw Error("duplicate instance id " + std::to_string(in.id));
    if (dense_ids && in.id != static_cast<int>(i)) throw Error("instance ids are not 0..N-1");
  }
  if (ds.distinct_labels() < 2) throw Error("single-class dataset");
}

/// Content hash over schema, classes and instances (not the name).
inline std::uint64_t dataset_hash(const Dataset& ds) {
  Hasher h;
  h.u64(ds.attributes.size());
  for (const auto& a : ds.attributes) {
    h.str(a.name).u64(static_cast<std::uint64_t>(a.kind)).u64(a.categories.size());
    for (const auto& c : a.categories) h.str(c);
  }
  h.u64(ds.classes.size());
  for (const auto& c : ds.classes) h.str(c);
  h.u64(ds.instances.size());
  for (const auto& in : ds.instances) {
    h.i64(in.id).i64(in.label);
    for (double v : in.x) is_missing(v) ? h.u64(0x7ff8dead) : h.f64(v);
  }
  return h.value();
}

// ---------------------------------------------------------------------------
// Text I/O

enum class TableFormat { automatic, csv, arff };

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline bool is_missing_token(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "?";
}

/// Splits one delimited record, honouring double or single quotes.
inline std::vector<std::string> split_record(std::string_view line, char delim, std::size_t line_no,
                                             std::size_t offset) {
  std::vector<std::string> out;
  std::string cur;
  char quote = 0;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) {
        if (i + 1 < line.size() && line[i + 1] == quote) {
          cur += c;
          ++i;
        } else {
          quote = 0;
        }
      } else {
        cur += c;
      }
    } else if ((c == '"' || c == '\'') && trim(cur).empty()) {
      quote = c;
      was_quoted = true;
      cur.clear();
    } else if (c == delim) {
      out.push_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quote) throw ParseError("unterminated quote on line " + std::to_string(line_no), line_no, offset);
  out.push_back(was_quoted ? cur : std::string(trim(cur)));
  return out;
}

inline std::string quote_if_needed(const std::string& s, char delim) {
  const bool needs = s.empty() || s == "?" || s.find(delim) != std::string::npos ||
                     s.find('"') != std::string::npos || s.find('\'') != std::string::npos ||
                     s.find(' ') != std::string::npos || s.find('{') != std::string::npos ||
                     s.find('}') != std::string::npos || s.find('%') != std::string::npos;
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;
  // ARFF declarations (empty optional = numeric, value = nominal list)
  std::vector<std::optional<std::vector<std::string>>> declared;
  bool has_declarations = false;
};

inline RawTable read_csv(std::istream& in) {
  RawTable t;
  std::string line;
  std::size_t line_no = 0, offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t here = offset;
    offset += line.size() + 1;
    if (trim(line).empty()) continue;
    auto fields = split_record(line, ',', line_no, here);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       line_no, here);
    t.rows.push_back(std::move(fields));
    t.row_lines.push_back(line_no);
  }
  if (t.header.empty()) throw ParseError("empty file", 0, 0);
  return t;
}

inline bool iequals_prefix(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  return true;
}

inline RawTable read_arff(std::istream& in) {
  RawTable t;
  t.has_declarations = true;
  std::string line;
  std::size_t line_no = 0, offset = 0;
  bool in_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t here = offset;
    offset += line.size() + 1;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '%') continue;
    if (!in_data) {
      if (iequals_prefix(s, "@relation")) continue;
      if (iequals_prefix(s, "@data")) {
        in_data = true;
        continue;
      }
      if (!iequals_prefix(s, "@attribute"))
        throw ParseError("line " + std::to_string(line_no) + ": unexpected declaration", line_no, here);
      s.remove_prefix(10);
      s = trim(s);
      std::string name;
      if (!s.empty() && (s.front() == '\'' || s.front() == '"')) {
        const char q = s.front();
        const auto end = s.find(q, 1);
        if (end == std::string_view::npos)
          throw ParseError("line " + std::to_string(line_no) + ": unterminated attribute name", line_no, here);
        name = std::string(s.substr(1, end - 1));
        s.remove_prefix(end + 1);
      } else {
        const auto end = s.find_first_of(" \t{");
        name = std::string(s.substr(0, end));
        s.remove_prefix(end == std::string_view::npos ? s.size() : end);
      }
      s = trim(s);
      if (!s.empty() && s.front() == '{') {
        const auto close = s.rfind('}');
        if (close == std::string_view::npos)
          throw ParseError("line " + std::to_string(line_no) + ": unterminated nominal list", line_no, here);
        auto values = split_record(s.substr(1, close - 1), ',', line_no, here);
        t.declared.emplace_back(std::move(values));
      } else if (iequals_prefix(s, "numeric") || iequals_prefix(s, "real") || iequals_prefix(s, "integer")) {
        t.declared.emplace_back(std::nullopt);
      } else {
        throw ParseError("line " + std::to_string(line_no) + ": unsupported attribute type", line_no, here);
      }
      t.header.push_back(std::move(name));
      continue;
    }
    if (s.front() == '{') throw ParseError("line " + std::to_string(line_no) + ": sparse rows are not supported", line_no, here);
    auto fields = split_record(s, ',', line_no, here);
    if (fields.size() != t.header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       line_no, here);
    t.rows.push_back(std::move(fields));
    t.row_lines.push_back(line_no);
  }
  if (t.header.empty()) throw ParseError("empty file", 0, 0);
  return t;
}

inline Dataset build_dataset(const RawTable& t, std::string_view class_col) {
  std::size_t class_idx = t.header.size() - 1;
  if (!class_col.empty()) {
    auto it = std::find(t.header.begin(), t.header.end(), class_col);
    if (it == t.header.end()) throw Error("class column '" + std::string(class_col) + "' not found");
    class_idx = static_cast<std::size_t>(it - t.header.begin());
  }
  if (t.rows.empty()) throw Error("empty file: no data rows");
  if (t.header.size() < 2) throw Error("table needs at least one feature column and a class column");

  Dataset ds;
  ds.class_attribute = t.header[class_idx];

  // Class list.
  if (t.has_declarations) {
    if (!t.declared[class_idx]) throw Error("class attribute must be nominal");
    ds.classes = *t.declared[class_idx];
  } else {
    std::set<std::string> names;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      if (!is_missing_token(t.rows[r][class_idx])) names.insert(t.rows[r][class_idx]);
    ds.classes.assign(names.begin(), names.end());
  }

  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != class_idx) cols.push_back(c);

  for (auto c : cols) {
    Attribute a;
    a.name = t.header[c];
    if (t.has_declarations) {
      if (t.declared[c]) {
        a.kind = AttributeKind::categorical;
        a.categories = *t.declared[c];
      }
    } else {
      bool numeric = true;
      std::set<std::string> cats;
      for (const auto& row : t.rows) {
        if (is_missing_token(row[c])) continue;
        if (!parse_number(row[c])) numeric = false;
        cats.insert(row[c]);
      }
      if (!numeric) {
        a.kind = AttributeKind::categorical;
        a.categories.assign(cats.begin(), cats.end());
      }
    }
    ds.attributes.push_back(std::move(a));
  }

  auto code_of = [](const std::vector<std::string>& list, const std::string& v) -> int {
    auto it = std::find(list.begin(), list.end(), v);
    return it == list.end() ? -1 : static_cast<int>(it - list.begin());
  };

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto line = t.row_lines[r];
    Instance in;
    in.id = static_cast<int>(r);
    if (is_missing_token(row[class_idx]))
      throw ParseError("line " + std::to_string(line) + ": missing class label", line, 0);
    in.label = code_of(ds.classes, row[class_idx]);
    if (in.label < 0)
      throw ParseError("line " + std::to_string(line) + ": undeclared class '" + row[class_idx] + "'", line, 0);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& cell = row[cols[j]];
      const auto& a = ds.attributes[j];
      if (is_missing_token(cell)) {
        in.x.push_back(kMissing);
      } else if (a.kind == AttributeKind::numeric) {
        auto v = parse_number(cell);
        if (!v) throw ParseError("line " + std::to_string(line) + ": non-numeric value '" + cell + "' in column '" + a.name + "'", line, 0);
        in.x.push_back(*v);
      } else {
        const int code = code_of(a.categories, cell);
        if (code < 0)
          throw ParseError("line " + std::to_string(line) + ": undeclared value '" + cell + "' in column '" + a.name + "'", line, 0);
        in.x.push_back(code);
      }
    }
    ds.instances.push_back(std::move(in));
  }
  if (ds.distinct_labels() < 2) throw Error("single-class dataset");
  return ds;
}

inline std::filesystem::path flips_path(const std::filesystem::path& table) {
  auto p = table;
  p.replace_extension();
  return p.string() + ".flips.tsv";
}

}  // namespace detail

inline TableFormat format_for(const std::filesystem::path& path, TableFormat f) {
  if (f != TableFormat::automatic) return f;
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".arff" ? TableFormat::arff : TableFormat::csv;
}

inline Dataset parse_table(std::istream& in, TableFormat format, std::string_view class_col = {}) {
  auto raw = format == TableFormat::arff ? detail::read_arff(in) : detail::read_csv(in);
  return detail::build_dataset(raw, class_col);
}

/// Flip sidecar: `instance_id\toriginal_label`, labels written by name.
inline void save_flips(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "instance_id\toriginal_label\n";
  for (const auto& f : ds.flips) out << f.instance_id << '\t' << ds.classes.at(f.original_label) << '\n';
}

inline std::vector<LabelFlip> load_flips(const Dataset& ds, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<LabelFlip> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || detail::trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("flip sidecar line " + std::to_string(line_no) + ": malformed", line_no, 0);
    auto id = detail::parse_number(std::string_view(line).substr(0, tab));
    const std::string label(detail::trim(std::string_view(line).substr(tab + 1)));
    auto it = std::find(ds.classes.begin(), ds.classes.end(), label);
    if (!id || it == ds.classes.end())
      throw ParseError("flip sidecar line " + std::to_string(line_no) + ": malformed", line_no, 0);
    out.push_back({static_cast<int>(*id), static_cast<int>(it - ds.classes.begin())});
  }
  return out;
}

/// Loads a dataset. The class column defaults to the last column. A flip
/// sidecar next to the file (`<stem>.flips.tsv`) is picked up if present.
inline Dataset load_table(const std::filesystem::path& path, TableFormat format = TableFormat::automatic,
                          std::string_view class_col = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  Dataset ds = parse_table(in, format_for(path, format), class_col);
  ds.name = path.stem().string();
  if (auto fp = detail::flips_path(path); std::filesystem::exists(fp)) ds.flips = load_flips(ds, fp);
  return ds;
}

inline void write_table(const Dataset& ds, std::ostream& out, TableFormat format) {
  auto cell = [&](const Attribute& a, double v) -> std::string {
    if (is_missing(v)) return "?";
    if (a.kind == AttributeKind::numeric) return format_double(v);
    return detail::quote_if_needed(a.categories.at(static_cast<std::size_t>(v)), ',');
  };
  if (format == TableFormat::arff) {
    out << "@relation " << detail::quote_if_needed(ds.name.empty() ? "data" : ds.name, ',') << "\n\n";
    auto decl = [&](const std::string& name, const std::vector<std::string>* cats) {
      out << "@attribute " << detail::quote_if_needed(name, ',') << ' ';
      if (!cats) {
        out << "numeric\n";
        return;
      }
      out << '{';
      for (std::size_t i = 0; i < cats->size(); ++i) out << (i ? "," : "") << detail::quote_if_needed((*cats)[i], ',');
      out << "}\n";
    };
    for (const auto& a : ds.attributes) decl(a.name, a.kind == AttributeKind::categorical ? &a.categories : nullptr);
    decl(ds.class_attribute, &ds.classes);
    out << "\n@data\n";
  } else {
    for (const auto& a : ds.attributes) out << detail::quote_if_needed(a.name, ',') << ',';
    out << detail::quote_if_needed(ds.class_attribute, ',') << '\n';
  }
  for (const auto& in : ds.instances) {
    for (std::size_t j = 0; j < ds.arity(); ++j) out << cell(ds.attributes[j], in.x[j]) << ',';
    out << detail::quote_if_needed(ds.classes.at(static_cast<std::size_t>(in.label)), ',') << '\n';
  }
}

/// Writes the table and, when the dataset carries flips, the sidecar.
inline void save_table(const Dataset& ds, const std::filesystem::path& path,
                       TableFormat format = TableFormat::automatic) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_table(ds, out, format_for(path, format));
  out.close();
  if (!ds.flips.empty()) save_flips(ds, detail::flips_path(path));
}

// ---------------------------------------------------------------------------
// Cross-validation plans

struct CvPlan {
  int repeats = 0;
  int folds = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds;            // one per repeat
  std::vector<std::vector<int>> assignments;   // [repeat][position] -> fold

  std::size_t size() const { return assignments.empty() ? 0 : assignments.front().size(); }

  std::vector<std::size_t> test_positions(int repeat, int fold) const {
    std::vector<std::size_t> out;
    const auto& a = assignments.at(static_cast<std::size_t>(repeat));
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_positions(int repeat, int fold) const {
    std::vector<std::size_t> out;
    const auto& a = assignments.at(static_cast<std::size_t>(repeat));
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] != fold) out.push_back(i);
    return out;
  }

  bool operator==(const CvPlan&) const = default;
};

/// Stratified repeated k-fold plan. Each class's instances are shuffled with
/// the repeat's seed and dealt round-robin, continuing the fold cursor from
/// class to class, so per-class and total fold sizes both differ by at most 1.
inline CvPlan make_cv_plan(const Dataset& ds, int repeats, int folds, std::uint64_t master_seed) {
  if (folds < 2) throw Error("folds must be >= 2");
  if (repeats < 1) throw Error("repeats must be >= 1");
  if (static_cast<std::size_t>(folds) > ds.size())
    throw Error("folds (" + std::to_string(folds) + ") exceed instance count (" + std::to_string(ds.size()) + ")");
  CvPlan plan;
  plan.repeats = repeats;
  plan.folds = folds;
  plan.master_seed = master_seed;
  for (int r = 0; r < repeats; ++r) {
    const auto seed = split_seed(master_seed, static_cast<std::uint64_t>(r));
    plan.seeds.push_back(seed);
    std::mt19937_64 rng(seed);
    std::vector<int> assign(ds.size(), -1);
    std::size_t cursor = 0;
    for (int c = 0; c < ds.num_classes(); ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.instances[i].label == c) members.push_back(i);
      std::shuffle(members.begin(), members.end(), rng);
      for (auto i : members) assign[i] = static_cast<int>(cursor++ % static_cast<std::size_t>(folds));
    }
    plan.assignments.push_back(std::move(assign));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Two unit-variance spherical Gaussians centred at -separation/2 and
/// +separation/2 on the first axis; round(noise_rate * N) labels flipped.
inline Dataset synth_gaussians(int n_per_class, int dims, double separation, double noise_rate,
                               std::uint64_t seed) {
  if (n_per_class < 1 || dims < 1) throw Error("n_per_class and dims must be >= 1");
  if (!(noise_rate >= 0.0 && noise_rate < 0.5)) throw Error("noise_rate must be in [0, 0.5)");
  Dataset ds;
  ds.name = "synth";
  for (int d = 0; d < dims; ++d) ds.attributes.push_back({"x" + std::to_string(d), AttributeKind::numeric, {}});
  ds.classes = {"c0", "c1"};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int id = 0;
  for (int c = 0; c < 2; ++c) {
    const double centre = (c == 0 ? -0.5 : 0.5) * separation;
    for (int i = 0; i < n_per_class; ++i) {
      Instance in;
      in.id = id++;
      in.label = c;
      for (int d = 0; d < dims; ++d) in.x.push_back(gauss(rng) + (d == 0 ? centre : 0.0));
      ds.instances.push_back(std::move(in));
    }
  }
  const auto n = ds.instances.size();
  const auto n_flip = static_cast<std::size_t>(std::llround(noise_rate * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(n_flip);
  std::sort(order.begin(), order.end());
  for (auto i : order) {
    auto& in = ds.instances[i];
    ds.flips.push_back({in.id, in.label});
    in.label = 1 - in.label;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Imputation and numeric encoding

/// Mean (numeric) / mode (categorical) fill values fit on a training portion.
class Imputer {
 public:
  Imputer() = default;
  explicit Imputer(const Dataset& train) {
    fill_.resize(train.arity(), 0.0);
    for (std::size_t j = 0; j < train.arity(); ++j) {
      const auto& a = train.attributes[j];
      if (a.kind == AttributeKind::numeric) {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& in : train.instances)
          if (!is_missing(in.x[j])) {
            sum += in.x[j];
            ++n;
          }
        fill_[j] = n ? sum / static_cast<double>(n) : 0.0;
      } else {
        std::vector<std::size_t> counts(a.categories.size(), 0);
        for (const auto& in : train.instances)
          if (!is_missing(in.x[j])) ++counts[static_cast<std::size_t>(in.x[j])];
        fill_[j] = counts.empty() ? 0.0 : argmax_lowest(counts);
      }
    }
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t j = 0; j < out.size(); ++j)
      if (is_missing(out[j])) out[j] = fill_[j];
    return out;
  }

  const std::vector<double>& fill_values() const { return fill_; }
  bool operator==(const Imputer&) const = default;

 private:
  std::vector<double> fill_;
};

/// One-hot + min-max encoder. All statistics come from the dataset passed to
/// the constructor; transform() never refits.
class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const Dataset& train) : imputer_(train), attributes_(train.attributes) {
    const auto d = train.arity();
    lo_.assign(d, 0.0);
    hi_.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      if (attributes_[j].kind != AttributeKind::numeric) {
        width_ += attributes_[j].categories.size();
        continue;
      }
      ++width_;
      bool first = true;
      for (const auto& in : train.instances) {
        const double v = is_missing(in.x[j]) ? imputer_.fill_values()[j] : in.x[j];
        if (first || v < lo_[j]) lo_[j] = v;
        if (first || v > hi_[j]) hi_[j] = v;
        first = false;
      }
    }
  }

  std::size_t width() const noexcept { return width_; }

  std::vector<double> transform(std::span<const double> x) const {
    std::vector<double> out;
    out.reserve(width_);
    const auto filled = imputer_.apply(x);
    for (std::size_t j = 0; j < attributes_.size(); ++j) {
      if (attributes_[j].kind == AttributeKind::numeric) {
        const double range = hi_[j] - lo_[j];
        out.push_back(range > 0 ? (filled[j] - lo_[j]) / range : 0.0);
      } else {
        const auto code = static_cast<std::size_t>(filled[j]);
        for (std::size_t c = 0; c < attributes_[j].categories.size(); ++c) out.push_back(c == code ? 1.0 : 0.0);
      }
    }
    return out;
  }

  std::vector<Attribute> encoded_attributes() const {
    std::vector<Attribute> out;
    for (const auto& a : attributes_) {
      if (a.kind == AttributeKind::numeric) {
        out.push_back({a.name, AttributeKind::numeric, {}});
      } else {
        for (const auto& c : a.categories) out.push_back({a.name + "=" + c, AttributeKind::numeric, {}});
      }
    }
    return out;
  }

  const Imputer& imputer() const { return imputer_; }
  bool operator==(const Encoder&) const = default;

 private:
  Imputer imputer_;
  std::vector<Attribute> attributes_;
  std::vector<double> lo_, hi_;
  std::size_t width_ = 0;
};

/// Encodes `target` with an encoder fit on `train` only.
inline Dataset encode_numeric(const Dataset& train, const Dataset& target) {
  const Encoder enc(train);
  Dataset out;
  out.name = target.name;
  out.attributes = enc.encoded_attributes();
  out.class_attribute = target.class_attribute;
  out.classes = target.classes;
  out.flips = target.flips;
  for (const auto& in : target.instances) out.instances.push_back({in.id, enc.transform(in.x), in.label});
  return out;
}

inline Dataset encode_numeric(const Dataset& ds) { return encode_numeric(ds, ds); }

}  // namespace hlab
