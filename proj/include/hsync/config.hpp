#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hsync/errors.hpp"
#include "hsync/interference.hpp"
#include "hsync/sync_protocol.hpp"

// Run configuration in a flat dotted-key text format:
//
//   # comment
//   scenario = enhancement
//   protocol.n_write_max = 12
//   [source_a]            # optional section header, prefixes later keys
//   gamma0 = 0.08
//
// Units are part of the key name. Unknown and duplicate keys are rejected.

namespace hsync {

enum class Scenario { Enhancement, HomScan, Chsh, ProtocolSim };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::Enhancement: return "enhancement";
    case Scenario::HomScan: return "hom_scan";
    case Scenario::Chsh: return "chsh";
    case Scenario::ProtocolSim: return "protocol_sim";
  }
  return "?";
}

inline std::optional<Scenario> parse_scenario(std::string_view s) {
  if (s == "enhancement") return Scenario::Enhancement;
  if (s == "hom_scan") return Scenario::HomScan;
  if (s == "chsh") return Scenario::Chsh;
  if (s == "protocol_sim") return Scenario::ProtocolSim;
  return std::nullopt;
}

struct EnhancementSweep {
  std::vector<double> tau_c_us;  // empty: the protocol's tau_c
  std::vector<int> n_write_max;  // empty: 1..protocol n_write_max
};

struct HomSettings {
  ScanDomain domain = ScanDomain::Time;
  std::optional<double> range_min;  // ns or MHz per domain
  std::optional<double> range_max;
  int points = 121;
  double coherence_fwhm_ns = 25.0;
  double alpha_1 = 0.12;
  double alpha_2 = 0.17;
  double p_i_1 = 0.08;
  double p_i_2 = 0.08;

  double lo() const { return range_min.value_or(domain == ScanDomain::Time ? -60.0 : -30.0); }
  double hi() const { return range_max.value_or(domain == ScanDomain::Time ? 60.0 : 30.0); }
};

enum class ChshMode { Analytic, Sampled };

struct ChshSettings {
  ChshMode mode = ChshMode::Analytic;
  double alpha_1 = 0.12;
  double alpha_2 = 0.17;
  double p_i_1 = 0.08;
  double p_i_2 = 0.08;
  ChshAngles angles;
  std::uint64_t n_events = 1'000'000;
};

struct RunConfig {
  Scenario scenario = Scenario::Enhancement;
  ProtocolParams protocol = paper_protocol();
  EnhancementSweep enhancement;
  HomSettings hom;
  ChshSettings chsh;
  std::uint64_t seed = 0;
  std::uint64_t trials = 1'000'000;
  std::string output_path = "out";
  bool record_trials = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ValueReader {
  std::string key;
  std::string value;
  std::size_t line;

  [[noreturn]] void fail(const std::string& expected) const {
    throw ConfigError(key, line, "expected " + expected + ", got '" + value + "'");
  }

  double real() const {
    double x = 0.0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, x);
    if (ec != std::errc{} || ptr != end) fail("a number");
    return x;
  }

  std::uint64_t u64() const {
    std::uint64_t x = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, x);
    if (ec != std::errc{} || ptr != end) fail("a non-negative integer");
    return x;
  }

  int integer() const {
    int x = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, x);
    if (ec != std::errc{} || ptr != end) fail("an integer");
    return x;
  }

  bool boolean() const {
    if (value == "true") return true;
    if (value == "false") return false;
    fail("true or false");
  }

  template <class T>
  std::vector<T> list(T (ValueReader::*one)() const) const {
    std::vector<T> out;
    std::string_view rest = value;
    while (true) {
      const auto comma = rest.find(',');
      ValueReader item{key, std::string(trim(rest.substr(0, comma))), line};
      if (item.value.empty()) fail("a comma-separated list");
      out.push_back((item.*one)());
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return out;
  }
};

using Setter = std::function<void(RunConfig&, const ValueReader&)>;

inline void add_source_keys(std::map<std::string, Setter>& keys, const std::string& prefix,
                            SourceParams ProtocolParams::*member) {
  keys[prefix + ".chi"] = [member](RunConfig& c, const ValueReader& v) { (c.protocol.*member).chi = v.real(); };
  keys[prefix + ".eta_as"] = [member](RunConfig& c, const ValueReader& v) { (c.protocol.*member).eta_as = v.real(); };
  keys[prefix + ".p_as"] = [member](RunConfig& c, const ValueReader& v) { (c.protocol.*member).p_as = v.real(); };
  keys[prefix + ".gamma0"] = [member](RunConfig& c, const ValueReader& v) { (c.protocol.*member).gamma0 = v.real(); };
  keys[prefix + ".alpha_override"] = [member](RunConfig& c, const ValueReader& v) {
    (c.protocol.*member).alpha_override = v.real();
  };
  keys[prefix + ".dark_click"] = [member](RunConfig& c, const ValueReader& v) {
    (c.protocol.*member).dark_click = v.real();
  };
}

inline const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> k;
    k["scenario"] = [](RunConfig& c, const ValueReader& v) {
      const auto s = parse_scenario(v.value);
      if (!s) v.fail("one of enhancement, hom_scan, chsh, protocol_sim");
      c.scenario = *s;
    };
    k["seed"] = [](RunConfig& c, const ValueReader& v) { c.seed = v.u64(); };
    k["trials"] = [](RunConfig& c, const ValueReader& v) { c.trials = v.u64(); };
    k["output_path"] = [](RunConfig& c, const ValueReader& v) { c.output_path = v.value; };

    k["protocol.n_write_max"] = [](RunConfig& c, const ValueReader& v) { c.protocol.n_write_max = v.integer(); };
    k["protocol.dt_write_ns"] = [](RunConfig& c, const ValueReader& v) { c.protocol.dt_write_ns = v.real(); };
    k["protocol.dt_read_ns"] = [](RunConfig& c, const ValueReader& v) { c.protocol.dt_read_ns = v.real(); };
    k["protocol.tau_c_us"] = [](RunConfig& c, const ValueReader& v) { c.protocol.tau_c_us = v.real(); };
    k["protocol.latency_ns"] = [](RunConfig& c, const ValueReader& v) { c.protocol.latency_ns = v.real(); };
    k["protocol.decay_model"] = [](RunConfig& c, const ValueReader& v) {
      if (v.value == "gaussian_half") c.protocol.decay_model = DecayModel::GaussianHalf;
      else if (v.value == "exponential") c.protocol.decay_model = DecayModel::Exponential;
      else v.fail("gaussian_half or exponential");
    };
    add_source_keys(k, "source_a", &ProtocolParams::source_a);
    add_source_keys(k, "source_b", &ProtocolParams::source_b);

    k["enhancement.tau_c_us"] = [](RunConfig& c, const ValueReader& v) {
      c.enhancement.tau_c_us = v.list(&ValueReader::real);
    };
    k["enhancement.n_write_max"] = [](RunConfig& c, const ValueReader& v) {
      c.enhancement.n_write_max = v.list(&ValueReader::integer);
    };

    k["hom.domain"] = [](RunConfig& c, const ValueReader& v) {
      if (v.value == "time") c.hom.domain = ScanDomain::Time;
      else if (v.value == "frequency") c.hom.domain = ScanDomain::Frequency;
      else v.fail("time or frequency");
    };
    k["hom.range_min"] = [](RunConfig& c, const ValueReader& v) { c.hom.range_min = v.real(); };
    k["hom.range_max"] = [](RunConfig& c, const ValueReader& v) { c.hom.range_max = v.real(); };
    k["hom.points"] = [](RunConfig& c, const ValueReader& v) { c.hom.points = v.integer(); };
    k["hom.coherence_fwhm_ns"] = [](RunConfig& c, const ValueReader& v) { c.hom.coherence_fwhm_ns = v.real(); };
    k["hom.alpha_1"] = [](RunConfig& c, const ValueReader& v) { c.hom.alpha_1 = v.real(); };
    k["hom.alpha_2"] = [](RunConfig& c, const ValueReader& v) { c.hom.alpha_2 = v.real(); };
    k["hom.p_i_1"] = [](RunConfig& c, const ValueReader& v) { c.hom.p_i_1 = v.real(); };
    k["hom.p_i_2"] = [](RunConfig& c, const ValueReader& v) { c.hom.p_i_2 = v.real(); };

    k["chsh.mode"] = [](RunConfig& c, const ValueReader& v) {
      if (v.value == "analytic") c.chsh.mode = ChshMode::Analytic;
      else if (v.value == "sampled") c.chsh.mode = ChshMode::Sampled;
      else v.fail("analytic or sampled");
    };
    k["chsh.alpha_1"] = [](RunConfig& c, const ValueReader& v) { c.chsh.alpha_1 = v.real(); };
    k["chsh.alpha_2"] = [](RunConfig& c, const ValueReader& v) { c.chsh.alpha_2 = v.real(); };
    k["chsh.p_i_1"] = [](RunConfig& c, const ValueReader& v) { c.chsh.p_i_1 = v.real(); };
    k["chsh.p_i_2"] = [](RunConfig& c, const ValueReader& v) { c.chsh.p_i_2 = v.real(); };
    k["chsh.theta1_deg"] = [](RunConfig& c, const ValueReader& v) { c.chsh.angles.a_deg = v.real(); };
    k["chsh.theta1p_deg"] = [](RunConfig& c, const ValueReader& v) { c.chsh.angles.ap_deg = v.real(); };
    k["chsh.theta2_deg"] = [](RunConfig& c, const ValueReader& v) { c.chsh.angles.b_deg = v.real(); };
    k["chsh.theta2p_deg"] = [](RunConfig& c, const ValueReader& v) { c.chsh.angles.bp_deg = v.real(); };
    k["chsh.n_events"] = [](RunConfig& c, const ValueReader& v) { c.chsh.n_events = v.u64(); };

    k["protocol_sim.record_trials"] = [](RunConfig& c, const ValueReader& v) { c.record_trials = v.boolean(); };
    return k;
  }();
  return table;
}

}  // namespace detail

// Every key the parser accepts, sorted.
inline std::vector<std::string> known_config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::key_table()) keys.push_back(k);
  return keys;
}

struct ParseOptions {
  // Supplies the scenario when the document omits it (e.g. from the CLI).
  // A document that names a different scenario is rejected.
  std::optional<Scenario> scenario;
};

inline RunConfig parse_config(std::string_view text, const ParseOptions& options = {}) {
  RunConfig cfg;
  const auto& table = detail::key_table();
  std::map<std::string, std::size_t> seen;
  std::string section;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(std::string(line), line_no, "malformed section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(std::string(line), line_no, "expected 'key = value'");
    std::string key(detail::trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("", line_no, "empty key");
    if (!section.empty()) key = section + "." + key;
    const std::string value(detail::trim(line.substr(eq + 1)));

    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key, line_no, "unknown key");
    if (const auto [prev, inserted] = seen.emplace(key, line_no); !inserted) {
      throw ConfigError(key, line_no, "duplicate key (first set on line " + std::to_string(prev->second) + ")");
    }
    if (value.empty()) throw ConfigError(key, line_no, "missing value");
    it->second(cfg, detail::ValueReader{key, value, line_no});
  }

  if (!seen.contains("scenario")) {
    if (!options.scenario) throw ConfigError("scenario", 0, "missing required key");
    cfg.scenario = *options.scenario;
  } else if (options.scenario && *options.scenario != cfg.scenario) {
    throw ConfigError("scenario", seen["scenario"],
                      std::string("document names '") + to_string(cfg.scenario) + "' but '" +
                          to_string(*options.scenario) + "' was requested");
  }

  // A source given only chi derives its herald rate from chi.
  for (const char* name : {"source_a", "source_b"}) {
    const std::string prefix(name);
    SourceParams& s = prefix == "source_a" ? cfg.protocol.source_a : cfg.protocol.source_b;
    if (seen.contains(prefix + ".chi") && !seen.contains(prefix + ".p_as")) s.p_as.reset();
  }

  const auto domain_check = [&](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const DomainError& e) {
      const auto it = seen.find(key);
      throw ConfigError(key, it == seen.end() ? 0 : it->second, e.what());
    }
  };
  domain_check("protocol", [&] { cfg.protocol.validate(); });
  if (cfg.trials == 0) throw ConfigError("trials", seen.contains("trials") ? seen["trials"] : 0, "must be >= 1");
  if (cfg.hom.points < 1) throw ConfigError("hom.points", seen["hom.points"], "must be >= 1");
  if (!(cfg.hom.coherence_fwhm_ns > 0.0)) {
    throw ConfigError("hom.coherence_fwhm_ns", seen["hom.coherence_fwhm_ns"], "must be > 0");
  }
  if (cfg.hom.lo() > cfg.hom.hi()) throw ConfigError("hom.range_min", seen["hom.range_min"], "exceeds hom.range_max");
  if (cfg.chsh.n_events == 0) throw ConfigError("chsh.n_events", seen["chsh.n_events"], "must be >= 1");
  for (int n : cfg.enhancement.n_write_max) {
    if (n < 1) throw ConfigError("enhancement.n_write_max", seen["enhancement.n_write_max"], "entries must be >= 1");
  }
  for (double t : cfg.enhancement.tau_c_us) {
    if (!(t > 0.0)) throw ConfigError("enhancement.tau_c_us", seen["enhancement.tau_c_us"], "entries must be > 0");
  }
  return cfg;
}

}  // namespace hsync
