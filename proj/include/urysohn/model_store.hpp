#pragma once

// Plain-text model files. Every real is written as a C99 hex float so a
// load reproduces the saved model bit for bit. Layout (one record per line,
// tokens separated by single spaces, names percent-escaped):
//
//   urysohn-model 1
//   kind single|tree
//   seed <u64>
//   config <key>=<value> ...            (training parameters, echo only)
//   inputs <m>
//   column <name> continuous <min> <max>
//   column <name> categorical <L> <level_1> ... <level_L>
//   output <name> continuous <min> <max>   | output <name> categorical 2 <l1> <l2>
//   addends <K>                          (tree only)
//   operator single|branch|root <function count>
//   function continuous <min> <max> <n> <v_1> ... <v_n>
//   function quantized <n> <v_1> ... <v_n>
//   end
//
// A single model has one `operator single`; a tree has K `operator branch`
// blocks of m functions followed by one `operator root` of K functions.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "urysohn/dataset.hpp"
#include "urysohn/piecewise_linear.hpp"
#include "urysohn/tree.hpp"

namespace urysohn {

enum class ModelKind { Single, Tree };

struct Model {
  ModelKind kind = ModelKind::Single;
  UrysohnOperator single;
  UrysohnTree tree;
  std::vector<ColumnSpec> columns;
  ColumnSpec output{"z", ColumnRole::Output};
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;

  [[nodiscard]] std::size_t input_count() const noexcept {
    return kind == ModelKind::Single ? single.input_count() : tree.input_count();
  }

  /// Out-of-domain inputs are clamped.
  [[nodiscard]] double predict(std::span<const double> x) const {
    if (kind == ModelKind::Single) return single.evaluate(x);
    tree.branches.front().check_arity(x.size());
    return urysohn::predict(tree, x);
  }

  friend bool operator==(const Model&, const Model&) = default;
};

class ModelFormatError : public std::runtime_error {
public:
  ModelFormatError(const std::string& what, std::size_t line)
      : std::runtime_error("model file line " + std::to_string(line) + ": " + what) {}
};

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  static const char* digits = "0123456789ABCDEF";
  std::string out;
  for (const unsigned char c : s) {
    if (c <= ' ' || c == '%' || c >= 0x7f) {
      out += '%';
      out += digits[c >> 4];
      out += digits[c & 15];
    } else {
      out += static_cast<char>(c);
    }
  }
  return out.empty() ? "%" : out;
}

inline std::string unescape(const std::string& s) {
  if (s == "%") return {};
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

inline void write_column(std::ostream& os, const char* tag, const ColumnSpec& c) {
  os << tag << ' ' << escape(c.name);
  if (c.is_categorical()) {
    os << " categorical " << c.categories.size();
    for (const auto& l : c.categories) os << ' ' << escape(l);
  } else {
    os << " continuous " << hex(c.min) << ' ' << hex(c.max);
  }
  os << '\n';
}

inline void write_operator(std::ostream& os, const char* role, const UrysohnOperator& op) {
  os << "operator " << role << ' ' << op.input_count() << '\n';
  for (const auto& f : op.functions()) {
    os << "function ";
    if (f.is_quantized())
      os << "quantized";
    else
      os << "continuous " << hex(f.domain_min()) << ' ' << hex(f.domain_max());
    os << ' ' << f.size();
    for (const double v : f.values()) os << ' ' << hex(v);
    os << '\n';
  }
}

/// Line-oriented token reader with line numbers for diagnostics.
class ModelReader {
public:
  explicit ModelReader(std::istream& in) : in_(in) {}

  /// Next non-empty line split into tokens; empty on end of input.
  std::vector<std::string> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string t; ss >> t;) tokens.push_back(std::move(t));
      if (!tokens.empty()) return tokens;
    }
    return {};
  }

  std::vector<std::string> expect(const std::string& keyword, std::size_t min_tokens) {
    auto t = next();
    if (t.empty()) fail("unexpected end of file, expected '" + keyword + "'");
    if (t[0] != keyword) fail("expected '" + keyword + "', found '" + t[0] + "'");
    if (t.size() < min_tokens) fail("'" + keyword + "' record is truncated");
    return t;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ModelFormatError(what, line_); }

  double real(const std::string& s) const {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty()) fail("malformed number '" + s + "'");
    return v;
  }

  std::size_t count(const std::string& s) const {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) fail("malformed count '" + s + "'");
    return static_cast<std::size_t>(std::stoull(s));
  }

  ColumnSpec column(const std::vector<std::string>& t, ColumnRole role) const {
    ColumnSpec c{unescape(t[1]), role};
    if (t[2] == "continuous") {
      if (t.size() != 5) fail("continuous column needs min and max");
      c.min = real(t[3]);
      c.max = real(t[4]);
    } else if (t[2] == "categorical") {
      const std::size_t n = count(t[3]);
      if (t.size() != 4 + n) fail("categorical column declares " + std::to_string(n) + " levels");
      c.kind = InputKind::Quantized;
      for (std::size_t k = 0; k < n; ++k) c.categories.push_back(unescape(t[4 + k]));
      // Two-level outputs are stored as -1 / +1.
      c.min = role == ColumnRole::Output ? -1.0 : 1.0;
      c.max = role == ColumnRole::Output ? 1.0 : static_cast<double>(n);
    } else {
      fail("unknown column kind '" + t[2] + "'");
    }
    return c;
  }

  UrysohnOperator op(const std::string& role) {
    const auto head = expect("operator", 3);
    if (head[1] != role) fail("expected operator '" + role + "', found '" + head[1] + "'");
    const std::size_t n = count(head[2]);
    if (n == 0) fail("operator without functions");
    std::vector<PiecewiseLinear> fs;
    for (std::size_t j = 0; j < n; ++j) {
      const auto t = expect("function", 3);
      try {
        if (t[1] == "quantized") {
          const std::size_t nodes = count(t[2]);
          if (t.size() != 3 + nodes) fail("function declares " + std::to_string(nodes) + " nodes");
          std::vector<double> v;
          for (std::size_t k = 0; k < nodes; ++k) v.push_back(real(t[3 + k]));
          fs.push_back(PiecewiseLinear::quantized(std::move(v)));
        } else if (t[1] == "continuous") {
          if (t.size() < 5) fail("'function' record is truncated");
          const std::size_t nodes = count(t[4]);
          if (t.size() != 5 + nodes) fail("function declares " + std::to_string(nodes) + " nodes");
          std::vector<double> v;
          for (std::size_t k = 0; k < nodes; ++k) v.push_back(real(t[5 + k]));
          fs.emplace_back(real(t[2]), real(t[3]), std::move(v));
        } else {
          fail("unknown function kind '" + t[1] + "'");
        }
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
    }
    return UrysohnOperator(std::move(fs));
  }

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace detail

inline void save_model(const Model& model, std::ostream& os) {
  os << "urysohn-model " << kModelFormatVersion << '\n';
  os << "kind " << (model.kind == ModelKind::Single ? "single" : "tree") << '\n';
  os << "seed " << model.seed << '\n';
  os << "config";
  for (const auto& [k, v] : model.config) os << ' ' << detail::escape(k) << '=' << detail::escape(v);
  os << '\n';
  os << "inputs " << model.columns.size() << '\n';
  for (const auto& c : model.columns) detail::write_column(os, "column", c);
  detail::write_column(os, "output", model.output);
  if (model.kind == ModelKind::Single) {
    detail::write_operator(os, "single", model.single);
  } else {
    os << "addends " << model.tree.addend_count() << '\n';
    for (const auto& b : model.tree.branches) detail::write_operator(os, "branch", b);
    detail::write_operator(os, "root", model.tree.root);
  }
  os << "end\n";
}

inline std::string save_model_string(const Model& model) {
  std::ostringstream os;
  save_model(model, os);
  return os.str();
}

inline void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path);
  save_model(model, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Model load_model(std::istream& in) {
  detail::ModelReader r(in);
  Model model;
  const auto magic = r.next();
  if (magic.size() != 2 || magic[0] != "urysohn-model") r.fail("not a model file");
  if (magic[1] != std::to_string(kModelFormatVersion)) r.fail("unsupported model format version '" + magic[1] + "'");

  const auto kind = r.expect("kind", 2);
  if (kind[1] == "single")
    model.kind = ModelKind::Single;
  else if (kind[1] == "tree")
    model.kind = ModelKind::Tree;
  else
    r.fail("unknown model kind '" + kind[1] + "'");

  const auto seed = r.expect("seed", 2);
  r.count(seed[1]);
  model.seed = std::stoull(seed[1]);

  const auto config = r.expect("config", 1);
  for (std::size_t i = 1; i < config.size(); ++i) {
    const auto eq = config[i].find('=');
    if (eq == std::string::npos) r.fail("config entry without '='");
    model.config.emplace_back(detail::unescape(config[i].substr(0, eq)), detail::unescape(config[i].substr(eq + 1)));
  }

  const std::size_t m = r.count(r.expect("inputs", 2)[1]);
  for (std::size_t j = 0; j < m; ++j) model.columns.push_back(r.column(r.expect("column", 4), ColumnRole::Input));
  model.output = r.column(r.expect("output", 4), ColumnRole::Output);

  if (model.kind == ModelKind::Single) {
    model.single = r.op("single");
    if (model.single.input_count() != m) r.fail("operator arity differs from input count");
  } else {
    const std::size_t K = r.count(r.expect("addends", 2)[1]);
    if (K == 0) r.fail("tree without branches");
    for (std::size_t k = 0; k < K; ++k) {
      model.tree.branches.push_back(r.op("branch"));
      if (model.tree.branches.back().input_count() != m) r.fail("branch arity differs from input count");
    }
    model.tree.root = r.op("root");
    try {
      model.tree.check_shape();
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
  }
  r.expect("end", 1);
  return model;
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  return load_model(in);
}

}  // namespace urysohn
