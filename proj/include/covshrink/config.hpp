#pragma once

// Experiment configuration: the method list, the flat key-value config
// grammar, and validation. The exact grammar is documented in the README;
// every parse error carries the offending line number.

#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "covshrink/datagen.hpp"
#include "covshrink/errors.hpp"
#include "covshrink/fitting.hpp"
#include "covshrink/oracle.hpp"

namespace covshrink {

// ---- estimator selection ----------------------------------------------------

struct MethodMwcv {};

struct MethodIsotonic {};

struct MethodLp {};

struct MethodLpEff {
  double tau_eff = 1.0;
};

struct MethodLinear {
  double alpha_s = 0.5;
};

// shrink_correlated with a known autocorrelation model
struct MethodCorrExp {
  double tau = 1.0;
};

struct MethodCorrVarma {
  Varma model;
};

// CV-oracle-driven fits; empty grids mean the documented defaults
struct MethodFitExp {
  std::vector<double> grid;
};

struct MethodFitEff {
  std::vector<double> grid;
};

struct MethodFitVarma {
  VarmaGrid grid;
};

using MethodSpec = std::variant<MethodMwcv, MethodIsotonic, MethodLp, MethodLpEff, MethodLinear,
                                MethodCorrExp, MethodCorrVarma, MethodFitExp, MethodFitEff,
                                MethodFitVarma>;

inline const char* method_label(const MethodSpec& method) {
  struct Labels {
    const char* operator()(const MethodMwcv&) const { return "mwcv"; }
    const char* operator()(const MethodIsotonic&) const { return "isotonic"; }
    const char* operator()(const MethodLp&) const { return "lp"; }
    const char* operator()(const MethodLpEff&) const { return "lp_eff"; }
    const char* operator()(const MethodLinear&) const { return "linear"; }
    const char* operator()(const MethodCorrExp&) const { return "exp_decay"; }
    const char* operator()(const MethodCorrVarma&) const { return "varma"; }
    const char* operator()(const MethodFitExp&) const { return "fit_exp_decay"; }
    const char* operator()(const MethodFitEff&) const { return "fit_effective"; }
    const char* operator()(const MethodFitVarma&) const { return "fit_varma"; }
  };
  return std::visit(Labels{}, method);
}

struct ExperimentConfig {
  Index n = 0;
  Index t = 0;
  CvConfig cv;  // t_train is filled from t at run time
  CrossModel cross = TwoPeak{};
  AutoModel auto_true = IdentityAuto{};
  NoiseDist noise = Gaussian{};
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
};

inline void validate_config(const ExperimentConfig& config) {
  if (config.n < 2) {
    throw ConfigError("config: n must be at least 2");
  }
  if (config.t < 1 || 100 * config.t < config.n) {
    throw ConfigError("config: t must be positive and at least n/100");
  }
  if (config.seeds.empty()) {
    throw ConfigError("config: seeds must be nonempty");
  }
  if (config.cv.k_folds < 1 || config.cv.t_out < 1) {
    throw ConfigError("config: k_folds and t_out must be at least 1");
  }
  for (std::size_t i = 0; i < config.methods.size(); ++i) {
    for (std::size_t j = i + 1; j < config.methods.size(); ++j) {
      if (std::string(method_label(config.methods[i])) == method_label(config.methods[j])) {
        throw ConfigError(std::string("config: method '") + method_label(config.methods[i]) +
                          "' requested more than once");
      }
    }
  }
}

// ---- parsing ----------------------------------------------------------------

namespace detail {

struct ParsePos {
  const std::string& origin;
  int line;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
  }
};

inline std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string::npos) {
    return "";
  }
  return s.substr(from, s.find_last_not_of(" \t\r") - from + 1);
}

// splits on sep outside parentheses; drops empty pieces caused by a
// trailing separator
inline std::vector<std::string> split_outside_parens(const std::string& s, char sep,
                                                     const ParsePos& pos) {
  std::vector<std::string> parts;
  std::string current;
  int depth = 0;
  for (char c : s) {
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (--depth < 0) {
        pos.fail("unbalanced ')'");
      }
    }
    if (c == sep && depth == 0) {
      parts.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (depth != 0) {
    pos.fail("unbalanced '('");
  }
  current = trim(current);
  if (!current.empty()) {
    parts.push_back(current);
  }
  return parts;
}

inline double parse_real(const std::string& tok, const ParsePos& pos) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) {
      pos.fail("trailing characters after number '" + tok + "'");
    }
    return v;
  } catch (const std::logic_error&) {
    pos.fail("expected a number, got '" + tok + "'");
  }
}

inline long long parse_integer(const std::string& tok, const ParsePos& pos) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size()) {
      pos.fail("trailing characters after integer '" + tok + "'");
    }
    return v;
  } catch (const std::logic_error&) {
    pos.fail("expected an integer, got '" + tok + "'");
  }
}

inline std::vector<double> parse_real_list(const std::string& s, const ParsePos& pos) {
  std::vector<double> values;
  for (const std::string& tok : split_outside_parens(s, ',', pos)) {
    values.push_back(parse_real(tok, pos));
  }
  if (values.empty()) {
    pos.fail("expected at least one number");
  }
  return values;
}

// "name" or "name(args)"
struct Call {
  std::string name;
  std::string args;
  bool has_args = false;
};

inline Call parse_call(const std::string& tok, const ParsePos& pos) {
  const auto open = tok.find('(');
  if (open == std::string::npos) {
    return Call{trim(tok), "", false};
  }
  if (tok.back() != ')') {
    pos.fail("expected ')' at the end of '" + tok + "'");
  }
  return Call{trim(tok.substr(0, open)), trim(tok.substr(open + 1, tok.size() - open - 2)), true};
}

// grid argument: linspace(lo, hi, count), logspace(lo, hi, count), or an
// explicit comma-separated list
inline std::vector<double> parse_grid(const std::string& s, const ParsePos& pos) {
  const Call call = parse_call(s, pos);
  if (call.name == "linspace" || call.name == "logspace") {
    const auto args = parse_real_list(call.args, pos);
    if (args.size() != 3) {
      pos.fail(call.name + " takes (lo, hi, count)");
    }
    const double lo = args[0];
    const double hi = args[1];
    const int count = int(args[2]);
    if (count < 1 || double(count) != args[2]) {
      pos.fail(call.name + " count must be a positive integer");
    }
    if (call.name == "logspace" && (!(lo > 0.0) || !(hi > 0.0))) {
      pos.fail("logspace endpoints must be positive");
    }
    std::vector<double> grid(static_cast<std::size_t>(count));
    grid.front() = lo;
    grid.back() = count == 1 ? lo : hi;
    for (int i = 1; i + 1 < count; ++i) {
      const double frac = double(i) / double(count - 1);
      grid[std::size_t(i)] = call.name == "logspace"
                                 ? std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * frac)
                                 : lo + (hi - lo) * frac;
    }
    return grid;
  }
  return parse_real_list(s, pos);
}

// "ar: 0.4; ma: 0.8, 0.5" with either section optional; a missing MA
// section means the pure-AR unit innovation a_0 = 1
inline Varma parse_varma_sections(const std::string& s, const ParsePos& pos) {
  Varma model;
  model.ma = {1.0};
  bool saw_ar = false;
  bool saw_ma = false;
  for (const std::string& section : split_outside_parens(s, ';', pos)) {
    const auto colon = section.find(':');
    if (colon == std::string::npos) {
      pos.fail("varma sections look like 'ar: ...' or 'ma: ...'");
    }
    const std::string label = trim(section.substr(0, colon));
    const auto values = parse_real_list(section.substr(colon + 1), pos);
    if (label == "ar") {
      if (saw_ar) {
        pos.fail("duplicate 'ar' section");
      }
      saw_ar = true;
      model.ar = values;
    } else if (label == "ma") {
      if (saw_ma) {
        pos.fail("duplicate 'ma' section");
      }
      saw_ma = true;
      model.ma = values;
    } else {
      pos.fail("unknown varma section '" + label + "'");
    }
  }
  if (!saw_ar && !saw_ma) {
    pos.fail("varma needs an 'ar' or 'ma' section");
  }
  return model;
}

// per-coefficient fit grids: "a0: 0.5, 0.6; a1: linspace(0, 0.6, 7); b1: ..."
// with labels a0..aK contiguous from a0 and b1..bK contiguous from b1
inline VarmaGrid parse_varma_grid(const std::string& s, const ParsePos& pos) {
  std::vector<std::vector<double>> ma(16);
  std::vector<std::vector<double>> ar(16);
  std::size_t ma_count = 0;
  std::size_t ar_count = 0;
  for (const std::string& section : split_outside_parens(s, ';', pos)) {
    const auto colon = section.find(':');
    if (colon == std::string::npos) {
      pos.fail("fit_varma sections look like 'a0: ...' or 'b1: ...'");
    }
    const std::string label = trim(section.substr(0, colon));
    if (label.size() < 2 || (label[0] != 'a' && label[0] != 'b')) {
      pos.fail("fit_varma labels are a0, a1, ... and b1, b2, ...");
    }
    const long long index = parse_integer(label.substr(1), pos);
    const auto grid = parse_grid(trim(section.substr(colon + 1)), pos);
    if (label[0] == 'a') {
      if (index < 0 || index >= static_cast<long long>(ma.size()) ||
          !ma[std::size_t(index)].empty()) {
        pos.fail("bad or duplicate label '" + label + "'");
      }
      ma[std::size_t(index)] = grid;
      ++ma_count;
    } else {
      if (index < 1 || index > static_cast<long long>(ar.size()) ||
          !ar[std::size_t(index - 1)].empty()) {
        pos.fail("bad or duplicate label '" + label + "'");
      }
      ar[std::size_t(index - 1)] = grid;
      ++ar_count;
    }
  }
  VarmaGrid out;
  for (std::size_t i = 0; i < ma_count; ++i) {
    if (ma[i].empty()) {
      pos.fail("fit_varma 'a' labels must be contiguous from a0");
    }
    out.ma_grids.push_back(ma[i]);
  }
  for (std::size_t i = 0; i < ar_count; ++i) {
    if (ar[i].empty()) {
      pos.fail("fit_varma 'b' labels must be contiguous from b1");
    }
    out.ar_grids.push_back(ar[i]);
  }
  if (out.ma_grids.empty() && out.ar_grids.empty()) {
    pos.fail("fit_varma needs at least one coefficient grid");
  }
  if (out.ma_grids.empty()) {
    out.ma_grids = {{1.0}};
  }
  return out;
}

inline CrossModel parse_cross(const std::string& s, const ParsePos& pos) {
  const Call call = parse_call(s, pos);
  if (call.name == "two_peak") {
    const auto args = parse_real_list(call.args, pos);
    if (args.size() != 3) {
      pos.fail("two_peak takes (low, high, fraction_high)");
    }
    if (!(args[0] > 0.0) || !(args[1] >= args[0]) || args[2] < 0.0 || args[2] > 1.0) {
      pos.fail("two_peak needs 0 < low <= high and fraction_high in [0, 1]");
    }
    return TwoPeak{args[0], args[1], args[2]};
  }
  if (call.name == "inverse_wishart") {
    const auto args = parse_real_list(call.args, pos);
    if (args.size() != 1) {
      pos.fail("inverse_wishart takes (kappa)");
    }
    if (!(args[0] > 0.0)) {
      pos.fail("inverse_wishart kappa must be positive");
    }
    return InverseWishart{args[0]};
  }
  pos.fail("unknown cross model '" + call.name + "'");
}

inline AutoModel parse_auto(const std::string& s, const ParsePos& pos) {
  const Call call = parse_call(s, pos);
  if (call.name == "identity") {
    if (call.has_args) {
      pos.fail("identity takes no arguments");
    }
    return IdentityAuto{};
  }
  if (call.name == "exp_decay") {
    const auto args = parse_real_list(call.args, pos);
    if (args.size() != 1) {
      pos.fail("exp_decay takes (tau)");
    }
    if (!(args[0] > 0.0)) {
      pos.fail("exp_decay tau must be positive");
    }
    return ExpDecay{args[0]};
  }
  if (call.name == "varma") {
    return parse_varma_sections(call.args, pos);
  }
  pos.fail("unknown autocorrelation model '" + call.name + "'");
}

inline NoiseDist parse_noise(const std::string& s, const ParsePos& pos) {
  const Call call = parse_call(s, pos);
  if (call.name == "gaussian") {
    if (call.has_args) {
      pos.fail("gaussian takes no arguments");
    }
    return Gaussian{};
  }
  if (call.name == "student_t") {
    const auto args = parse_real_list(call.args, pos);
    if (args.size() != 1) {
      pos.fail("student_t takes (nu)");
    }
    if (!(args[0] > 2.0)) {
      pos.fail("student_t nu must exceed 2 for a finite variance");
    }
    return StudentT{args[0]};
  }
  pos.fail("unknown noise distribution '" + call.name + "'");
}

inline MethodSpec parse_method(const std::string& tok, const ParsePos& pos) {
  const Call call = parse_call(tok, pos);
  auto one_real = [&](const char* what) {
    const auto args = parse_real_list(call.args, pos);
    if (args.size() != 1) {
      pos.fail(std::string(what) + " takes one number");
    }
    return args[0];
  };
  if (call.name == "mwcv" || call.name == "isotonic" || call.name == "lp") {
    if (call.has_args) {
      pos.fail(call.name + " takes no arguments");
    }
    if (call.name == "mwcv") {
      return MethodMwcv{};
    }
    return call.name == "isotonic" ? MethodSpec{MethodIsotonic{}} : MethodSpec{MethodLp{}};
  }
  if (call.name == "lp_eff") {
    const double tau_eff = one_real("lp_eff");
    if (!(tau_eff > 0.0)) {
      pos.fail("lp_eff tau must be positive");
    }
    return MethodLpEff{tau_eff};
  }
  if (call.name == "linear") {
    const double alpha_s = one_real("linear");
    if (alpha_s < 0.0 || alpha_s > 1.0) {
      pos.fail("linear alpha must lie in [0, 1]");
    }
    return MethodLinear{alpha_s};
  }
  if (call.name == "exp_decay") {
    const double tau = one_real("exp_decay");
    if (!(tau > 0.0)) {
      pos.fail("exp_decay tau must be positive");
    }
    return MethodCorrExp{tau};
  }
  if (call.name == "varma") {
    return MethodCorrVarma{parse_varma_sections(call.args, pos)};
  }
  auto tau_grid = [&]() {
    const auto grid = call.has_args ? parse_grid(call.args, pos) : default_tau_grid();
    for (double tau : grid) {
      if (!(tau > 0.0)) {
        pos.fail("fit tau grids must be positive");
      }
    }
    return grid;
  };
  if (call.name == "fit_exp_decay") {
    return MethodFitExp{tau_grid()};
  }
  if (call.name == "fit_effective") {
    return MethodFitEff{tau_grid()};
  }
  if (call.name == "fit_varma") {
    return MethodFitVarma{call.has_args ? parse_varma_grid(call.args, pos) : default_varma_grid()};
  }
  pos.fail("unknown method '" + call.name + "'");
}

}  // namespace detail

/// Parses the flat key-value config grammar; origin names the source in
/// error messages. Unknown and duplicate keys are rejected.
inline ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  ExperimentConfig config;
  std::vector<std::string> seen;
  bool have_n = false;
  bool have_t = false;
  bool have_cross = false;
  bool have_auto = false;

  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const detail::ParsePos pos{origin, line};
    const auto comment = raw.find('#');
    const std::string text = detail::trim(comment == std::string::npos ? raw : raw.substr(0, comment));
    if (text.empty()) {
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      pos.fail("expected 'key = value'");
    }
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    if (key.empty() || value.empty()) {
      pos.fail("expected 'key = value'");
    }
    for (const std::string& prior : seen) {
      if (prior == key) {
        pos.fail("duplicate key '" + key + "'");
      }
    }
    seen.push_back(key);

    if (key == "n") {
      config.n = Index(detail::parse_integer(value, pos));
      have_n = true;
    } else if (key == "t") {
      config.t = Index(detail::parse_integer(value, pos));
      have_t = true;
    } else if (key == "k_folds") {
      config.cv.k_folds = int(detail::parse_integer(value, pos));
    } else if (key == "t_out") {
      config.cv.t_out = Index(detail::parse_integer(value, pos));
    } else if (key == "cross") {
      config.cross = detail::parse_cross(value, pos);
      have_cross = true;
    } else if (key == "auto") {
      config.auto_true = detail::parse_auto(value, pos);
      have_auto = true;
    } else if (key == "noise") {
      config.noise = detail::parse_noise(value, pos);
    } else if (key == "methods") {
      for (const std::string& tok : detail::split_outside_parens(value, ',', pos)) {
        config.methods.push_back(detail::parse_method(tok, pos));
      }
    } else if (key == "seeds") {
      for (const std::string& tok : detail::split_outside_parens(value, ',', pos)) {
        const long long seed = detail::parse_integer(tok, pos);
        if (seed < 0) {
          pos.fail("seeds must be nonnegative");
        }
        config.seeds.push_back(std::uint64_t(seed));
      }
    } else if (key == "output_dir") {
      config.output_dir = value;
    } else {
      pos.fail("unknown key '" + key + "'");
    }
  }

  const detail::ParsePos pos{origin, line};
  if (!have_n || !have_t) {
    pos.fail("missing required key 'n' or 't'");
  }
  if (!have_cross || !have_auto) {
    pos.fail("missing required key 'cross' or 'auto'");
  }
  if (config.seeds.empty()) {
    pos.fail("missing required key 'seeds'");
  }
  validate_config(config);
  return config;
}

/// Loads and validates a config file.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  return parse_config(in, path);
}

}  // namespace covshrink
