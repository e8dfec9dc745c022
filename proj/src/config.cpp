#include "se2hypo/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "se2hypo/errors.hpp"

namespace se2hypo {

// ---------------------------------------------------------------------------
// TOML subset parser

namespace {

class TomlParser {
 public:
  TomlParser(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  TomlDocument parse() {
    TomlDocument doc;
    std::string table;
    std::map<std::string, bool> tables_seen;
    while (!at_end()) {
      skip_blank();
      if (at_end()) break;
      const char c = peek();
      if (c == '\n') {
        advance();
        continue;
      }
      if (c == '#') {
        skip_comment();
        continue;
      }
      if (c == '[') {
        const int line = line_, col = col_;
        advance();
        skip_blank();
        table = bare_key();
        skip_blank();
        expect(']');
        if (tables_seen[table]) error(line, col, "duplicate table [" + table + "]");
        tables_seen[table] = true;
        end_of_line();
        continue;
      }
      const int line = line_, col = col_;
      const std::string key = bare_key();
      skip_blank();
      expect('=');
      skip_blank();
      TomlEntry entry{value(), line, col};
      end_of_line();
      const std::string full = table.empty() ? key : table + "." + key;
      if (doc.count(full)) error(line, col, "duplicate key '" + full + "'");
      doc.emplace(full, std::move(entry));
    }
    return doc;
  }

 private:
  [[noreturn]] void error(int line, int col, const std::string& msg) const {
    throw ConfigError(fmt::format("{}:{}:{}: {}", source_, line, col, msg));
  }
  [[noreturn]] void error(const std::string& msg) const { error(line_, col_, msg); }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  char advance() {
    const char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  void skip_blank() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) advance();
  }
  void skip_comment() {
    while (!at_end() && peek() != '\n') advance();
  }
  void expect(char c) {
    if (peek() != c) error(fmt::format("expected '{}'", c));
    advance();
  }
  void end_of_line() {
    skip_blank();
    if (peek() == '#') skip_comment();
    if (!at_end() && peek() != '\n') error("unexpected trailing characters");
  }

  std::string bare_key() {
    std::string k;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                         peek() == '-')) {
      k += advance();
    }
    if (k.empty()) error("expected a key");
    return k;
  }

  TomlValue value() {
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const int line = line_, col = col_;
      std::string word;
      while (!at_end() && std::isalpha(static_cast<unsigned char>(peek()))) word += advance();
      if (word == "true") return true;
      if (word == "false") return false;
      error(line, col, "unsupported value '" + word + "' (strings must be quoted)");
    }
    return number();
  }

  std::string basic_string() {
    advance();
    std::string s;
    for (;;) {
      if (at_end() || peek() == '\n') error("unterminated string");
      const char c = advance();
      if (c == '"') break;
      if (c != '\\') {
        s += c;
        continue;
      }
      if (at_end()) error("unterminated escape");
      switch (const char e = advance()) {
        case '"': s += '"'; break;
        case '\\': s += '\\'; break;
        case 'n': s += '\n'; break;
        case 't': s += '\t'; break;
        default: error(fmt::format("unsupported escape '\\{}'", e));
      }
    }
    return s;
  }

  std::string literal_string() {
    advance();
    std::string s;
    for (;;) {
      if (at_end() || peek() == '\n') error("unterminated string");
      const char c = advance();
      if (c == '\'') break;
      s += c;
    }
    return s;
  }

  TomlValue number() {
    const int line = line_, col = col_;
    std::string raw;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                         peek() == '-' || peek() == '.' || peek() == '_')) {
      raw += advance();
    }
    if (raw.empty()) error(line, col, "expected a value");
    std::string digits;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '_') {
        digits += raw[i];
        continue;
      }
      const bool ok = i > 0 && i + 1 < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i - 1])) &&
                      std::isdigit(static_cast<unsigned char>(raw[i + 1]));
      if (!ok) error(line, col, "misplaced underscore in number '" + raw + "'");
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    const char* last = digits.data() + digits.size();
    if (is_float) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        error(line, col, "invalid number '" + raw + "'");
      }
      return v;
    }
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) error(line, col, "invalid integer '" + raw + "'");
    return v;
  }

  const std::string& text_;
  std::string source_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

TomlDocument parse_toml(const std::string& text, const std::string& source) {
  return TomlParser(text, source).parse();
}

// ---------------------------------------------------------------------------
// Commands

const char* to_string(Command c) noexcept {
  switch (c) {
    case Command::VerifyIdentities: return "verify-identities";
    case Command::Spectrum: return "spectrum";
    case Command::Simulate: return "simulate";
    case Command::Stationarity: return "stationarity";
    case Command::Rates: return "rates";
    case Command::FullReport: return "full-report";
  }
  return "?";
}

Command parse_command(const std::string& s) {
  for (Command c : {Command::VerifyIdentities, Command::Spectrum, Command::Simulate,
                    Command::Stationarity, Command::Rates, Command::FullReport}) {
    if (s == to_string(c)) return c;
  }
  throw ConfigError("command: unknown command '" + s +
                    "' (expected verify-identities, spectrum, simulate, stationarity, rates, "
                    "full-report)");
}

// ---------------------------------------------------------------------------
// Key bindings

namespace {

std::string where(const std::string& key, const TomlEntry& e) {
  return fmt::format("{} (line {}, column {})", key, e.line, e.column);
}

double as_double(const std::string& key, const TomlEntry& e) {
  if (const auto* d = std::get_if<double>(&e.value)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&e.value)) return static_cast<double>(*i);
  throw ConfigError(where(key, e) + ": expected a number");
}

std::int64_t as_int(const std::string& key, const TomlEntry& e) {
  if (const auto* i = std::get_if<std::int64_t>(&e.value)) return *i;
  throw ConfigError(where(key, e) + ": expected an integer");
}

bool as_bool(const std::string& key, const TomlEntry& e) {
  if (const auto* b = std::get_if<bool>(&e.value)) return *b;
  throw ConfigError(where(key, e) + ": expected true or false");
}

std::string as_string(const std::string& key, const TomlEntry& e) {
  if (const auto* s = std::get_if<std::string>(&e.value)) return *s;
  throw ConfigError(where(key, e) + ": expected a quoted string");
}

std::string render_double(double v) {
  std::string s = fmt::format("{}", v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string render_string(const std::string& v) {
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

struct Binding {
  std::string key;
  std::function<void(RunConfig&, const std::string&, const TomlEntry&)> set;
  std::function<std::string(const RunConfig&)> render;
};

template <class Get>
Binding real(std::string key, Get get) {
  return {key,
          [get](RunConfig& c, const std::string& k, const TomlEntry& e) { get(c) = as_double(k, e); },
          [get](const RunConfig& c) { return render_double(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Binding integer(std::string key, Get get) {
  return {key,
          [get](RunConfig& c, const std::string& k, const TomlEntry& e) {
            const std::int64_t v = as_int(k, e);
            if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
              throw ConfigError(where(k, e) + ": integer out of range");
            }
            get(c) = static_cast<int>(v);
          },
          [get](const RunConfig& c) { return fmt::format("{}", get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Binding boolean(std::string key, Get get) {
  return {key,
          [get](RunConfig& c, const std::string& k, const TomlEntry& e) { get(c) = as_bool(k, e); },
          [get](const RunConfig& c) { return get(const_cast<RunConfig&>(c)) ? "true" : "false"; }};
}

template <class Get>
Binding text(std::string key, Get get) {
  return {key,
          [get](RunConfig& c, const std::string& k, const TomlEntry& e) { get(c) = as_string(k, e); },
          [get](const RunConfig& c) { return render_string(get(const_cast<RunConfig&>(c))); }};
}

#define SE2_FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      {"command",
       [](RunConfig& c, const std::string& k, const TomlEntry& e) {
         try {
           c.command = parse_command(as_string(k, e));
         } catch (const ConfigError& err) {
           throw ConfigError(where(k, e) + ": " + err.what());
         }
       },
       [](const RunConfig& c) { return render_string(to_string(c.command)); }},
      real("sigma", SE2_FIELD(sigma)),
      {"seed",
       [](RunConfig& c, const std::string& k, const TomlEntry& e) {
         const std::int64_t v = as_int(k, e);
         if (v < 0) throw ConfigError(where(k, e) + ": seed must be >= 0");
         c.seed = static_cast<std::uint64_t>(v);
       },
       [](const RunConfig& c) { return fmt::format("{}", c.seed); }},
      text("output_dir", SE2_FIELD(output_dir)),
      integer("threads", SE2_FIELD(threads)),

      text("potential.kind", SE2_FIELD(potential.kind)),
      real("potential.a1", SE2_FIELD(potential.a1)),
      real("potential.a2", SE2_FIELD(potential.a2)),
      real("potential.height", SE2_FIELD(potential.height)),
      text("potential.table", SE2_FIELD(potential.table)),

      real("discretization.half_width1", SE2_FIELD(discretization.half_width1)),
      real("discretization.half_width2", SE2_FIELD(discretization.half_width2)),
      integer("discretization.n1", SE2_FIELD(discretization.n1)),
      integer("discretization.n2", SE2_FIELD(discretization.n2)),
      integer("discretization.modes", SE2_FIELD(discretization.modes)),
      integer("discretization.max_dimension", SE2_FIELD(discretization.max_dimension)),
      real("discretization.boundary_tol", SE2_FIELD(discretization.boundary_tol)),

      integer("poincare.n", SE2_FIELD(poincare.n)),
      real("poincare.half_width", SE2_FIELD(poincare.half_width)),
      real("poincare.boundary_tol", SE2_FIELD(poincare.boundary_tol)),
      boolean("poincare.refine", SE2_FIELD(poincare.refine)),

      integer("identities.samples", SE2_FIELD(identities.samples)),
      integer("identities.terms", SE2_FIELD(identities.terms)),
      integer("identities.max_degree", SE2_FIELD(identities.max_degree)),
      integer("identities.max_frequency", SE2_FIELD(identities.max_frequency)),
      integer("identities.n", SE2_FIELD(identities.n)),
      integer("identities.modes", SE2_FIELD(identities.modes)),
      real("identities.half_width", SE2_FIELD(identities.half_width)),
      integer("identities.structure_samples", SE2_FIELD(identities.structure_samples)),
      integer("identities.coercivity_samples", SE2_FIELD(identities.coercivity_samples)),

      text("spectrum.method", SE2_FIELD(spectrum.method)),
      integer("spectrum.dense_limit", SE2_FIELD(spectrum.dense_limit)),
      real("spectrum.shift", SE2_FIELD(spectrum.shift)),
      integer("spectrum.krylov_dim", SE2_FIELD(spectrum.krylov_dim)),
      boolean("spectrum.dump_matrices", SE2_FIELD(spectrum.dump_matrices)),

      integer("elliptic.samples", SE2_FIELD(elliptic.samples)),
      integer("elliptic.n_coarse", SE2_FIELD(elliptic.n_coarse)),
      integer("elliptic.n_fine", SE2_FIELD(elliptic.n_fine)),
      integer("elliptic.modes", SE2_FIELD(elliptic.modes)),
      real("elliptic.half_width", SE2_FIELD(elliptic.half_width)),
      real("elliptic.stability_tol", SE2_FIELD(elliptic.stability_tol)),

      real("simulation.dt", SE2_FIELD(simulation.dt)),
      real("simulation.t_final", SE2_FIELD(simulation.t_final)),
      integer("simulation.n_paths", SE2_FIELD(simulation.n_paths)),
      text("simulation.observable", SE2_FIELD(simulation.observable)),
      text("simulation.initial", SE2_FIELD(simulation.initial)),
      real("simulation.initial_xi1", SE2_FIELD(simulation.initial_xi1)),
      real("simulation.initial_xi2", SE2_FIELD(simulation.initial_xi2)),
      real("simulation.initial_theta", SE2_FIELD(simulation.initial_theta)),
      real("simulation.sample_interval", SE2_FIELD(simulation.sample_interval)),
      boolean("simulation.mirrored", SE2_FIELD(simulation.mirrored)),
      integer("simulation.trajectory_paths", SE2_FIELD(simulation.trajectory_paths)),

      real("stationarity.dt", SE2_FIELD(stationarity.dt)),
      real("stationarity.burn_in", SE2_FIELD(stationarity.burn_in)),
      integer("stationarity.n_samples", SE2_FIELD(stationarity.n_samples)),
      real("stationarity.alpha", SE2_FIELD(stationarity.alpha)),

      text("autocorrelation.observable", SE2_FIELD(autocorrelation.observable)),
      real("autocorrelation.dt", SE2_FIELD(autocorrelation.dt)),
      real("autocorrelation.burn_in", SE2_FIELD(autocorrelation.burn_in)),
      real("autocorrelation.t_total", SE2_FIELD(autocorrelation.t_total)),
      real("autocorrelation.lag_step", SE2_FIELD(autocorrelation.lag_step)),
      real("autocorrelation.max_lag", SE2_FIELD(autocorrelation.max_lag)),
      integer("autocorrelation.batches", SE2_FIELD(autocorrelation.batches)),
      real("autocorrelation.fit_t_min", SE2_FIELD(autocorrelation.fit_t_min)),
      real("autocorrelation.fit_t_max", SE2_FIELD(autocorrelation.fit_t_max)),

      real("rates.tol", SE2_FIELD(rates.tol)),
      real("rates.c2_override", SE2_FIELD(rates.c2_override)),
  };
  return table;
}

#undef SE2_FIELD

}  // namespace

RunConfig config_from_toml(const TomlDocument& doc) {
  RunConfig cfg;
  std::map<std::string, const Binding*> index;
  for (const Binding& b : bindings()) index[b.key] = &b;
  for (const auto& [key, entry] : doc) {
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError(where(key, entry) + ": unknown key");
    it->second->set(cfg, key, entry);
  }
  return cfg;
}

void apply_override(TomlDocument& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "': expected key=value");
  }
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  const std::string key = trim(assignment.substr(0, eq));
  const std::string raw = trim(assignment.substr(eq + 1));
  const auto dot = key.rfind('.');
  const std::string table = dot == std::string::npos ? "" : key.substr(0, dot);
  const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
  auto parse_value = [&](const std::string& v) {
    const std::string text = (table.empty() ? "" : "[" + table + "]\n") + name + " = " + v + "\n";
    return parse_toml(text, "override '" + assignment + "'");
  };
  TomlDocument parsed;
  try {
    parsed = parse_value(raw);
  } catch (const ConfigError&) {
    // Unquoted words are taken as strings on the command line.
    if (raw.find_first_of("\"'") != std::string::npos) throw;
    parsed = parse_value(render_string(raw));
  }
  for (auto& [k, v] : parsed) doc[k] = v;
}

RunConfig resolve_config(const ConfigSources& sources) {
  TomlDocument doc;
  if (!sources.file.empty()) {
    std::ifstream in(sources.file);
    if (!in) throw ConfigError("cannot open config file " + sources.file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    doc = parse_toml(buf.str(), sources.file.string());
  }
  if (sources.use_environment) {
    if (const char* env = std::getenv("SE2HYPO_OUTPUT_DIR"); env && *env) {
      doc["output_dir"] = TomlEntry{std::string(env), 0, 0};
    }
  }
  for (const std::string& o : sources.overrides) apply_override(doc, o);
  RunConfig cfg = config_from_toml(doc);
  cfg.validate();
  return cfg;
}

std::string to_toml(const RunConfig& cfg) {
  std::string out;
  std::string current;
  for (const Binding& b : bindings()) {
    const auto dot = b.key.find('.');
    const std::string table = dot == std::string::npos ? "" : b.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? b.key : b.key.substr(dot + 1);
    if (table != current) {
      out += "\n[" + table + "]\n";
      current = table;
    }
    out += name + " = " + b.render(cfg) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

[[noreturn]] void invalid(const std::string& key, const std::string& constraint, double got) {
  throw ConfigError(fmt::format("{}: must be {} (got {})", key, constraint, got));
}

void require_positive(const std::string& key, double v) {
  if (!std::isfinite(v) || !(v > 0.0)) invalid(key, "> 0", v);
}

void require_at_least(const std::string& key, double v, double lo) {
  if (!(v >= lo)) invalid(key, fmt::format(">= {}", lo), v);
}

void require_dt_cap(const std::string& key, double dt, double sigma) {
  require_positive(key, dt);
  const double cap = 0.1 / std::max(1.0, sigma * sigma);
  if (dt > cap) invalid(key, fmt::format("<= 0.1/max(1, sigma^2) = {}", cap), dt);
}

}  // namespace

void RunConfig::validate() const {
  require_positive("sigma", sigma);
  require_at_least("threads", threads, 1);

  const auto& p = potential;
  if (p.kind != "quadratic" && p.kind != "double_well" && p.kind != "flat" && p.kind != "tabulated") {
    throw ConfigError("potential.kind: must be one of quadratic, double_well, flat, tabulated (got '" +
                      p.kind + "')");
  }
  require_positive("potential.a1", p.a1);
  require_positive("potential.a2", p.a2);
  require_positive("potential.height", p.height);
  if (p.kind == "tabulated" && p.table.empty()) {
    throw ConfigError("potential.table: must name a CSV file when potential.kind = \"tabulated\"");
  }

  const auto& d = discretization;
  require_positive("discretization.half_width1", d.half_width1);
  require_positive("discretization.half_width2", d.half_width2);
  require_at_least("discretization.n1", d.n1, 8);
  require_at_least("discretization.n2", d.n2, 8);
  require_at_least("discretization.modes", d.modes, 2);
  require_positive("discretization.boundary_tol", d.boundary_tol);
  if (d.dimension() > d.max_dimension) {
    throw ConfigError(fmt::format(
        "discretization.max_dimension: n1*n2*(2*modes+1) = {} must be <= max_dimension = {}",
        d.dimension(), d.max_dimension));
  }

  require_at_least("poincare.n", poincare.n, 8);
  require_at_least("poincare.half_width", poincare.half_width, 0.0);
  require_positive("poincare.boundary_tol", poincare.boundary_tol);

  const auto& id = identities;
  require_at_least("identities.samples", id.samples, 1);
  require_at_least("identities.terms", id.terms, 1);
  require_at_least("identities.max_degree", id.max_degree, 0);
  require_at_least("identities.max_frequency", id.max_frequency, 0);
  require_at_least("identities.n", id.n, 8);
  require_at_least("identities.modes", id.modes, 2);
  require_positive("identities.half_width", id.half_width);
  require_at_least("identities.structure_samples", id.structure_samples, 1);
  require_at_least("identities.coercivity_samples", id.coercivity_samples, 1);

  try {
    parse_gap_method(spectrum.method);
  } catch (const InputError& e) {
    throw ConfigError(std::string("spectrum.method: ") + e.what());
  }
  require_at_least("spectrum.dense_limit", spectrum.dense_limit, 0);
  require_positive("spectrum.shift", spectrum.shift);
  require_at_least("spectrum.krylov_dim", spectrum.krylov_dim, 10);

  require_at_least("elliptic.samples", elliptic.samples, 1);
  require_at_least("elliptic.n_coarse", elliptic.n_coarse, 8);
  require_at_least("elliptic.n_fine", elliptic.n_fine, 8);
  require_at_least("elliptic.modes", elliptic.modes, 2);
  require_positive("elliptic.half_width", elliptic.half_width);
  require_positive("elliptic.stability_tol", elliptic.stability_tol);

  const auto& s = simulation;
  require_dt_cap("simulation.dt", s.dt, sigma);
  require_at_least("simulation.t_final", s.t_final, s.dt);
  require_at_least("simulation.n_paths", s.n_paths, 1);
  try {
    observable_by_name(s.observable);
  } catch (const InputError& e) {
    throw ConfigError(std::string("simulation.observable: ") + e.what());
  }
  if (s.initial != "point" && s.initial != "equilibrium") {
    throw ConfigError("simulation.initial: must be \"point\" or \"equilibrium\" (got '" + s.initial + "')");
  }
  if (s.initial == "equilibrium" && p.kind == "flat") {
    throw ConfigError("simulation.initial: equilibrium start needs a normalizable potential (kind is flat)");
  }
  require_positive("simulation.sample_interval", s.sample_interval);
  require_at_least("simulation.trajectory_paths", s.trajectory_paths, 0);

  require_dt_cap("stationarity.dt", stationarity.dt, sigma);
  require_at_least("stationarity.burn_in", stationarity.burn_in, 0.0);
  require_at_least("stationarity.n_samples", stationarity.n_samples, 20);
  if (!(stationarity.alpha > 0.0 && stationarity.alpha < 1.0)) {
    invalid("stationarity.alpha", "in (0, 1)", stationarity.alpha);
  }

  const auto& a = autocorrelation;
  try {
    observable_by_name(a.observable);
  } catch (const InputError& e) {
    throw ConfigError(std::string("autocorrelation.observable: ") + e.what());
  }
  require_dt_cap("autocorrelation.dt", a.dt, sigma);
  require_at_least("autocorrelation.burn_in", a.burn_in, 0.0);
  require_at_least("autocorrelation.lag_step", a.lag_step, a.dt);
  require_positive("autocorrelation.max_lag", a.max_lag);
  require_at_least("autocorrelation.t_total", a.t_total, a.batches * (a.max_lag + a.lag_step));
  require_at_least("autocorrelation.batches", a.batches, 2);
  require_at_least("autocorrelation.fit_t_min", a.fit_t_min, 0.0);
  if (!(a.fit_t_max > a.fit_t_min) || a.fit_t_max > a.max_lag + 1e-12) {
    invalid("autocorrelation.fit_t_max", "in (fit_t_min, max_lag]", a.fit_t_max);
  }

  require_at_least("rates.tol", rates.tol, 0.0);
  require_at_least("rates.c2_override", rates.c2_override, 0.0);
}

PotentialSpec RunConfig::potential_spec() const {
  const auto& p = potential;
  if (p.kind == "quadratic") return PotentialSpec::quadratic(p.a1, p.a2);
  if (p.kind == "double_well") return PotentialSpec::double_well(p.height);
  if (p.kind == "flat") return PotentialSpec::flat();
  try {
    return PotentialSpec::tabulated(load_tabulated_csv(p.table));
  } catch (const InputError& e) {
    throw ConfigError(std::string("potential.table: ") + e.what());
  }
}

SimConfig RunConfig::simulation_config() const {
  SimConfig c;
  c.sigma = sigma;
  c.potential = potential_spec();
  c.dt = simulation.dt;
  c.t_final = simulation.t_final;
  c.n_paths = simulation.n_paths;
  c.seed = seed;
  if (simulation.initial == "point") {
    c.initial_point = GroupPoint(simulation.initial_xi1, simulation.initial_xi2, simulation.initial_theta);
  } else {
    c.initial_point.reset();
  }
  c.sample_interval = simulation.sample_interval;
  c.mirrored = simulation.mirrored;
  c.threads = threads;
  return c;
}

}  // namespace se2hypo
