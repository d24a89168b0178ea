#pragma once

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hsync/config.hpp"
#include "hsync/errors.hpp"
#include "hsync/interference.hpp"
#include "hsync/photon_statistics.hpp"
#include "hsync/sync_protocol.hpp"

namespace hsync {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<std::monostate, std::int64_t, double>;

inline std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string format_cell(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  return {};
}

// CSV table kept in rendered form so per-trial dumps stay compact.
class Table {
 public:
  Table() = default;
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return rows_; }

  void add_row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_.size()) throw std::logic_error("row width does not match table columns");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) body_ += ',';
      body_ += format_cell(cells[k]);
    }
    body_ += '\n';
    ++rows_;
  }

  std::string csv() const {
    std::string out;
    for (std::size_t k = 0; k < columns_.size(); ++k) {
      if (k) out += ',';
      out += columns_[k];
    }
    out += '\n';
    return out + body_;
  }

 private:
  std::vector<std::string> columns_;
  std::string body_;
  std::size_t rows_ = 0;
};

// ---------------------------------------------------------------------------
// Summary

struct RunSummary {
  Scenario scenario = Scenario::Enhancement;
  std::map<std::string, double> metrics;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersion;

  double metric(const std::string& name) const {
    const auto it = metrics.find(name);
    if (it == metrics.end()) throw std::out_of_range("no metric '" + name + "'");
    return it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [k, v] : metrics) m[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    return {{"scenario", to_string(scenario)},
            {"metrics", m},
            {"config_hash", config_hash},
            {"seed", seed},
            {"version", version}};
  }
};

struct ScenarioOutput {
  RunSummary summary;
  std::optional<Table> table;
};

namespace detail {

inline nlohmann::json source_json(const SourceParams& s) {
  const auto opt = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
  return {{"chi", opt(s.chi)},       {"eta_as", s.eta_as},
          {"p_as", opt(s.p_as)},     {"gamma0", s.gamma0},
          {"alpha_override", opt(s.alpha_override)}, {"dark_click", s.dark_click}};
}

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Fully resolved configuration (defaults applied). Object keys are sorted, so
// the dump does not depend on the order keys appeared in the document.
inline nlohmann::json resolved_config_json(const RunConfig& c) {
  const ProtocolParams& p = c.protocol;
  return {
      {"scenario", to_string(c.scenario)},
      {"seed", c.seed},
      {"trials", c.trials},
      {"output_path", c.output_path},
      {"protocol",
       {{"n_write_max", p.n_write_max},
        {"dt_write_ns", p.dt_write_ns},
        {"dt_read_ns", p.dt_read_ns},
        {"tau_c_us", p.tau_c_us},
        {"decay_model", to_string(p.decay_model)},
        {"latency_ns", p.latency_ns}}},
      {"source_a", detail::source_json(p.source_a)},
      {"source_b", detail::source_json(p.source_b)},
      {"enhancement", {{"tau_c_us", c.enhancement.tau_c_us}, {"n_write_max", c.enhancement.n_write_max}}},
      {"hom",
       {{"domain", c.hom.domain == ScanDomain::Time ? "time" : "frequency"},
        {"range_min", c.hom.lo()},
        {"range_max", c.hom.hi()},
        {"points", c.hom.points},
        {"coherence_fwhm_ns", c.hom.coherence_fwhm_ns},
        {"alpha_1", c.hom.alpha_1},
        {"alpha_2", c.hom.alpha_2},
        {"p_i_1", c.hom.p_i_1},
        {"p_i_2", c.hom.p_i_2}}},
      {"chsh",
       {{"mode", c.chsh.mode == ChshMode::Analytic ? "analytic" : "sampled"},
        {"alpha_1", c.chsh.alpha_1},
        {"alpha_2", c.chsh.alpha_2},
        {"p_i_1", c.chsh.p_i_1},
        {"p_i_2", c.chsh.p_i_2},
        {"theta1_deg", c.chsh.angles.a_deg},
        {"theta1p_deg", c.chsh.angles.ap_deg},
        {"theta2_deg", c.chsh.angles.b_deg},
        {"theta2p_deg", c.chsh.angles.bp_deg},
        {"n_events", c.chsh.n_events}}},
      {"protocol_sim", {{"record_trials", c.record_trials}}},
  };
}

// The output location does not change results, so it is left out of the hash.
inline std::string config_hash(const RunConfig& c) {
  auto j = resolved_config_json(c);
  j.erase("output_path");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, detail::fnv1a(j.dump()));
  return buf;
}

// ---------------------------------------------------------------------------
// Scenarios

namespace detail {

inline ScenarioOutput run_enhancement(const RunConfig& c) {
  ScenarioOutput out;
  auto& m = out.summary.metrics;
  m["enhancement"] = enhancement_factor(c.protocol);
  m["p4c_feedback"] = p4c_feedback_closed_form(c.protocol);
  m["p4c_no_feedback"] = p4c_no_feedback(c.protocol);
  m["n_write_max"] = c.protocol.n_write_max;
  m["tau_c_us"] = c.protocol.tau_c_us;
  m["n_squared"] = static_cast<double>(c.protocol.n_write_max) * c.protocol.n_write_max;

  std::vector<double> taus = c.enhancement.tau_c_us;
  if (taus.empty()) taus.push_back(c.protocol.tau_c_us);
  std::vector<int> ns = c.enhancement.n_write_max;
  if (ns.empty()) {
    for (int n = 1; n <= c.protocol.n_write_max; ++n) ns.push_back(n);
  }
  Table t({"tau_c_us", "n_write_max", "enhancement"});
  for (double tau : taus) {
    for (int n : ns) {
      ProtocolParams p = c.protocol;
      p.tau_c_us = tau;
      p.n_write_max = n;
      t.add_row({tau, std::int64_t{n}, enhancement_factor(p)});
    }
  }
  out.table = std::move(t);
  return out;
}

inline ScenarioOutput run_hom_scan(const RunConfig& c) {
  const HomSettings& h = c.hom;
  const auto grid = linspace(h.lo(), h.hi(), static_cast<std::size_t>(h.points));
  const HomScan scan = hom_scan(h.alpha_1, h.alpha_2, h.p_i_1, h.p_i_2, h.coherence_fwhm_ns, h.domain, grid);
  const HOMResult dip = hom_coincidence(h.alpha_1, h.alpha_2, h.p_i_1, h.p_i_2, 1.0);

  ScenarioOutput out;
  auto& m = out.summary.metrics;
  const double fwhm_t = hom_dip_fwhm(h.coherence_fwhm_ns, ScanDomain::Time);
  const double fwhm_f = hom_dip_fwhm(h.coherence_fwhm_ns, ScanDomain::Frequency);
  m["fwhm"] = scan.fwhm;
  m["fwhm_time_ns"] = fwhm_t;
  m["fwhm_frequency_mhz"] = fwhm_f;
  m["time_bandwidth_product"] = fwhm_t * fwhm_f * 1e-3;
  m["visibility"] = scan.visibility;
  m["c_plat"] = dip.c_plat;
  m["c_dip"] = dip.c_dip;

  Table t({h.domain == ScanDomain::Time ? "delay_ns" : "detuning_mhz", "coincidence", "plateau"});
  for (const auto& pt : scan.curve) t.add_row({pt.abscissa, pt.coincidence, scan.plateau});
  out.table = std::move(t);
  return out;
}

inline ScenarioOutput run_chsh(const RunConfig& c) {
  const ChshSettings& s = c.chsh;
  const EffectiveTwoPhotonState state = effective_state(s.alpha_1, s.alpha_2, s.p_i_1, s.p_i_2);
  const CHSHResult model = chsh_for_state(state, s.angles);

  ScenarioOutput out;
  auto& m = out.summary.metrics;
  m["w_singlet"] = state.w_singlet;
  m["w_hh"] = state.w_hh;
  m["w_vv"] = state.w_vv;
  m["alpha_bar"] = 0.5 * (s.alpha_1 + s.alpha_2);
  m["predicted_S"] = predicted_S(0.5 * (s.alpha_1 + s.alpha_2));
  m["alpha_threshold"] = violation_threshold_alpha();
  m["S_model"] = model.s;

  if (s.mode == ChshMode::Analytic) {
    m["S"] = model.s;
    Table t({"theta1_deg", "theta2_deg", "e"});
    const auto set = s.angles.settings();
    for (std::size_t k = 0; k < 4; ++k) t.add_row({set[k][0], set[k][1], model.e[k]});
    out.table = std::move(t);
    return out;
  }

  const ChshSample sample = sample_chsh_experiment(state, s.angles, s.n_events, c.seed);
  m["S"] = sample.result.s;
  m["sigma_s"] = sample.result.sigma_s;
  m["n_sigma"] = sample.result.n_sigma;
  m["n_events_per_setting"] = static_cast<double>(s.n_events);
  Table t({"theta1_deg", "theta2_deg", "n_pp", "n_pm", "n_mp", "n_mm", "e", "sigma_e"});
  for (const auto& k : sample.counts) {
    t.add_row({k.theta1_deg, k.theta2_deg, static_cast<std::int64_t>(k.n_pp), static_cast<std::int64_t>(k.n_pm),
               static_cast<std::int64_t>(k.n_mp), static_cast<std::int64_t>(k.n_mm), k.correlation(), k.sigma()});
  }
  out.table = std::move(t);
  return out;
}

inline ScenarioOutput run_protocol_sim(const RunConfig& c) {
  ScenarioOutput out;
  CampaignOptions opts;
  Table records({"trial", "herald_a", "herald_b", "hold_a_ns", "hold_b_ns", "four_fold"});
  if (c.record_trials) {
    opts.on_trial = [&records](std::uint64_t k, const TrialOutcome& o) {
      const auto idx = [](const std::optional<int>& h) { return h ? Cell{std::int64_t{*h}} : Cell{}; };
      const auto hold = [](const std::optional<int>& h, double t) { return h ? Cell{t} : Cell{}; };
      records.add_row({static_cast<std::int64_t>(k), idx(o.herald_a), idx(o.herald_b), hold(o.herald_a, o.hold_time_a_ns),
                       hold(o.herald_b, o.hold_time_b_ns), std::int64_t{o.four_fold ? 1 : 0}});
    };
  }
  const CoincidenceStats stats = simulate_campaign(c.protocol, c.trials, c.seed, opts);
  const double closed = p4c_feedback_closed_form(c.protocol);

  auto& m = out.summary.metrics;
  m["trials"] = static_cast<double>(stats.trials);
  m["four_fold_count"] = static_cast<double>(stats.four_fold_count);
  m["p4c_hat"] = stats.p4c_hat();
  m["std_err"] = stats.std_err();
  m["p4c_closed_form"] = closed;
  m["p4c_click_model"] = p4c_feedback_click_model(c.protocol);
  m["z_score"] = stats.std_err() > 0.0 ? (stats.p4c_hat() - closed) / stats.std_err() : std::nan("");
  m["herald_rate_a"] = static_cast<double>(stats.herald_a_count) / static_cast<double>(stats.trials);
  m["herald_rate_b"] = static_cast<double>(stats.herald_b_count) / static_cast<double>(stats.trials);
  m["enhancement"] = enhancement_factor(c.protocol);
  if (c.record_trials) out.table = std::move(records);
  return out;
}

}  // namespace detail

// Dispatches to the owning module. Module domain errors are rethrown with the
// scenario name prefixed.
inline ScenarioOutput run_scenario(const RunConfig& config) {
  ScenarioOutput out;
  try {
    switch (config.scenario) {
      case Scenario::Enhancement: out = detail::run_enhancement(config); break;
      case Scenario::HomScan: out = detail::run_hom_scan(config); break;
      case Scenario::Chsh: out = detail::run_chsh(config); break;
      case Scenario::ProtocolSim: out = detail::run_protocol_sim(config); break;
    }
  } catch (const DomainError& e) {
    throw DomainError(std::string(to_string(config.scenario)) + ": " + e.what());
  }
  out.summary.scenario = config.scenario;
  out.summary.seed = config.seed;
  out.summary.config_hash = config_hash(config);
  return out;
}

struct OutputPaths {
  std::filesystem::path summary;
  std::optional<std::filesystem::path> table;
};

// Writes `<dir>/summary.json` and, when a table exists, `<dir>/<scenario>.csv`.
inline OutputPaths emit_outputs(const RunSummary& summary, const std::optional<Table>& table,
                                const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  const auto write = [](const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.close();
    if (!f) throw IoError("write to " + path.string() + " failed");
  };

  OutputPaths paths;
  paths.summary = dir / "summary.json";
  write(paths.summary, summary.to_json().dump(2) + "\n");
  if (table) {
    paths.table = dir / (std::string(to_string(summary.scenario)) + ".csv");
    write(*paths.table, table->csv());
  }
  return paths;
}

}  // namespace hsync
