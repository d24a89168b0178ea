#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "hsync/errors.hpp"
#include "hsync/photon_statistics.hpp"
#include "hsync/random.hpp"

// Two-node feedback synchronization: each node keeps writing until it
// heralds, holds the excitation, tells its peer, and both read together once
// both memories are loaded.

namespace hsync {

enum class DecayModel { GaussianHalf, Exponential };

inline const char* to_string(DecayModel m) {
  return m == DecayModel::GaussianHalf ? "gaussian_half" : "exponential";
}

struct ProtocolParams {
  int n_write_max = 12;       // write attempts per node per trial
  double dt_write_ns = 800.0;  // spacing of write attempts
  double dt_read_ns = 400.0;   // mutual-ready to read
  double tau_c_us = 12.0;      // memory lifetime
  DecayModel decay_model = DecayModel::GaussianHalf;
  double latency_ns = 0.0;     // one-way sync message latency
  SourceParams source_a;
  SourceParams source_b;

  void validate() const {
    if (n_write_max < 1) throw DomainError("n_write_max must be >= 1");
    if (!(dt_write_ns > 0.0)) throw DomainError("dt_write must be > 0");
    if (!(dt_read_ns >= 0.0)) throw DomainError("dt_read must be >= 0");
    if (!(tau_c_us > 0.0)) throw DomainError("tau_c must be > 0");
    if (!(latency_ns >= 0.0)) throw DomainError("latency must be >= 0");
    source_a.validate();
    source_b.validate();
  }

  // Hold time of the later-heralding node: ready/go round trip plus the
  // read delay.
  double base_hold_ns() const { return dt_read_ns + 2.0 * latency_ns; }
};

// Shipped profile: p_AS = 2.0e-3, N = 12, tau_c = 12 us, 800 ns write
// spacing, 400 ns read delay, 8% retrieval at zero hold.
inline SourceParams paper_source() {
  SourceParams s;
  s.p_as = 2.0e-3;
  s.gamma0 = 0.08;
  return s;
}

inline ProtocolParams paper_protocol() {
  ProtocolParams p;
  p.source_a = paper_source();
  p.source_b = paper_source();
  return p;
}

inline double memory_retrieval_efficiency(double gamma0, double hold_ns, DecayModel model, double tau_c_us) {
  if (!(hold_ns >= 0.0)) throw DomainError("hold time must be >= 0");
  if (!(tau_c_us > 0.0)) throw DomainError("tau_c must be > 0");
  const double x = hold_ns / (tau_c_us * 1e3);
  switch (model) {
    case DecayModel::GaussianHalf: return gamma0 * std::exp(-0.5 * x * x);
    case DecayModel::Exponential: return gamma0 * std::exp(-x);
  }
  return gamma0;
}

// ---------------------------------------------------------------------------
// Closed forms

// Four-fold coincidence probability with feedback, partitioned by which node
// heralds first; simultaneous heralds are one stratum. `retrieval_a(t)` and
// `retrieval_b(t)` give the probability that a node's stored excitation
// produces a detected Stokes photon after holding for t ns.
template <class RetrievalA, class RetrievalB>
double p4c_feedback_sum(double p_a, double p_b, int n_write_max, double dt_write_ns, double base_hold_ns,
                        RetrievalA&& retrieval_a, RetrievalB&& retrieval_b) {
  const auto n = static_cast<std::size_t>(n_write_max);
  std::vector<double> first_a(n), first_b(n), late_a(n), late_b(n);
  double survive_a = 1.0, survive_b = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    first_a[k] = p_a * survive_a;
    first_b[k] = p_b * survive_b;
    survive_a *= 1.0 - p_a;
    survive_b *= 1.0 - p_b;
    const double hold = static_cast<double>(k) * dt_write_ns + base_hold_ns;
    late_a[k] = retrieval_a(hold);
    late_b[k] = retrieval_b(hold);
  }
  const double base_a = late_a[0], base_b = late_b[0];

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += first_a[i] * first_b[i] * base_a * base_b;
    for (std::size_t j = i + 1; j < n; ++j) {
      total += first_a[i] * first_b[j] * late_a[j - i] * base_b;
      total += first_b[i] * first_a[j] * late_b[j - i] * base_a;
    }
  }
  return total;
}

namespace detail {

// Fraction of heralds that carry a real excitation (dark clicks carry none).
inline double real_herald_fraction(const SourceParams& s) {
  const double h = s.herald_probability();
  return h > 0.0 ? s.excitation_herald_probability() / h : 0.0;
}

}  // namespace detail

// Baseline without feedback: both nodes write once and read after dt_read.
inline double p4c_no_feedback(const ProtocolParams& params) {
  params.validate();
  const auto gamma = [&](const SourceParams& s) {
    return detail::real_herald_fraction(s) *
           memory_retrieval_efficiency(s.gamma0, params.dt_read_ns, params.decay_model, params.tau_c_us);
  };
  return params.source_a.herald_probability() * gamma(params.source_a) *
         params.source_b.herald_probability() * gamma(params.source_b);
}

inline double p4c_feedback_closed_form(const ProtocolParams& params) {
  params.validate();
  const auto retrieval = [&](const SourceParams& s) {
    const double f = detail::real_herald_fraction(s);
    return [&params, &s, f](double hold_ns) {
      return f * memory_retrieval_efficiency(s.gamma0, hold_ns, params.decay_model, params.tau_c_us);
    };
  };
  return p4c_feedback_sum(params.source_a.herald_probability(), params.source_b.herald_probability(),
                          params.n_write_max, params.dt_write_ns, params.base_hold_ns(),
                          retrieval(params.source_a), retrieval(params.source_b));
}

inline double enhancement_factor(const ProtocolParams& params) {
  const double base = p4c_no_feedback(params);
  if (!(base > 0.0)) throw DomainError("enhancement undefined: no-feedback coincidence probability is zero");
  return p4c_feedback_closed_form(params) / base;
}

// Probability of at least one Stokes photon from a heralded node whose
// single-excitation retrieval efficiency is gamma; includes the two-excitation
// feed-through of the binomial loss model.
inline double stokes_click_probability(const FockDistribution& spin, double gamma) {
  return 1.0 - retrieve(spin, gamma)[0];
}

// Closed form matched to the event simulator's multi-excitation read model.
inline double p4c_feedback_click_model(const ProtocolParams& params) {
  params.validate();
  const auto retrieval = [&](const SourceParams& s) {
    return [&params, &s, spin = s.spin_distribution()](double hold_ns) {
      return stokes_click_probability(
          spin, memory_retrieval_efficiency(s.gamma0, hold_ns, params.decay_model, params.tau_c_us));
    };
  };
  return p4c_feedback_sum(params.source_a.herald_probability(), params.source_b.herald_probability(),
                          params.n_write_max, params.dt_write_ns, params.base_hold_ns(),
                          retrieval(params.source_a), retrieval(params.source_b));
}

// ---------------------------------------------------------------------------
// Event-driven trial simulation

namespace phase {
struct Writing {
  int attempt = 0;
};
struct Holding {
  double herald_time_ns = 0.0;
};
struct Reading {};
struct Done {
  bool success = false;
};
}  // namespace phase

using NodePhase = std::variant<phase::Writing, phase::Holding, phase::Reading, phase::Done>;

struct NodeState {
  NodePhase phase = phase::Writing{};
  std::optional<double> herald_time_ns;

  // Writing->Writing, Writing->Holding, Writing->Done(failure),
  // Holding->Reading, Reading->Done.
  static bool allowed(const NodePhase& from, const NodePhase& to) {
    if (std::holds_alternative<phase::Writing>(from)) {
      if (const auto* d = std::get_if<phase::Done>(&to)) return !d->success;
      return std::holds_alternative<phase::Writing>(to) || std::holds_alternative<phase::Holding>(to);
    }
    if (std::holds_alternative<phase::Holding>(from)) return std::holds_alternative<phase::Reading>(to);
    if (std::holds_alternative<phase::Reading>(from)) return std::holds_alternative<phase::Done>(to);
    return false;
  }

  void transition(NodePhase next) {
    if (!allowed(phase, next)) throw std::logic_error("illegal node phase transition");
    phase = next;
  }
};

struct TrialOutcome {
  std::optional<int> herald_a, herald_b;
  double hold_time_a_ns = 0.0, hold_time_b_ns = 0.0;
  int stokes_a = 0, stokes_b = 0;
  bool four_fold = false;
  // Time at which each node began its read, NaN if it never did.
  double read_time_a_ns = std::nan(""), read_time_b_ns = std::nan("");
};

namespace detail {

// Per-source quantities the trial loop needs, resolved once.
struct NodeModel {
  double herald_probability = 0.0;
  std::array<double, kMaxQuanta + 1> spin_cdf{};
  double gamma0 = 0.0;

  explicit NodeModel(const SourceParams& s) : herald_probability(s.herald_probability()), gamma0(s.gamma0) {
    if (herald_probability > 0.0) {
      const FockDistribution q = s.spin_distribution();
      spin_cdf = {q[0], q[0] + q[1], 1.0};
    }
  }
};

// A node's write sequence is drawn up front: Herald fires at the attempt that
// clicks, Exhausted at the last attempt when none does.
enum class EventKind : std::uint8_t { Herald, Exhausted, ReadyArrives, GoArrives, Read };

struct Event {
  double time_ns;
  std::uint32_t seq;
  std::uint8_t node;
  EventKind kind;
  double payload;  // herald time on a ready message, attempt index on write outcomes
};

// Number of failed attempts before the first herald, geometric in p.
inline int first_herald_attempt(double p, int limit, SplitMix64& rng) {
  if (p >= 1.0) return 0;
  if (p <= 0.0) return limit;
  const double k = std::floor(std::log1p(-rng.uniform()) / std::log1p(-p));
  return k < static_cast<double>(limit) ? static_cast<int>(k) : limit;
}

// Bounded min-queue ordered by (time, insertion sequence). A trial never has
// more than two write outcomes, two ready messages, one go message and two reads
// pending.
class EventQueue {
 public:
  void push(double time_ns, std::uint8_t node, EventKind kind, double payload = 0.0) {
    if (size_ == events_.size()) throw std::logic_error("event queue overflow");
    events_[size_++] = Event{time_ns, next_seq_++, node, kind, payload};
  }

  bool empty() const { return size_ == 0; }

  double next_time() const { return events_[min_index()].time_ns; }

  Event pop() {
    const std::size_t k = min_index();
    const Event e = events_[k];
    events_[k] = events_[--size_];
    return e;
  }

 private:
  std::size_t min_index() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < size_; ++k) {
      const Event& a = events_[k];
      const Event& b = events_[best];
      if (a.time_ns < b.time_ns || (a.time_ns == b.time_ns && a.seq < b.seq)) best = k;
    }
    return best;
  }

  std::array<Event, 8> events_{};
  std::size_t size_ = 0;
  std::uint32_t next_seq_ = 0;
};

}  // namespace detail

// Precomputed simulator for one parameter set. Cheap to copy; `run` is const
// and thread-safe.
class ProtocolSimulator {
 public:
  explicit ProtocolSimulator(const ProtocolParams& params)
      : params_((params.validate(), params)), nodes_{detail::NodeModel(params.source_a), detail::NodeModel(params.source_b)} {}

  const ProtocolParams& params() const { return params_; }

  TrialOutcome run(SplitMix64& rng) const {
    using detail::EventKind;
    std::array<NodeState, 2> state{};
    std::array<int, 2> stokes{0, 0};
    std::array<double, 2> hold{0.0, 0.0};
    std::array<double, 2> read_time{std::nan(""), std::nan("")};
    std::array<std::optional<int>, 2> herald_index;

    detail::EventQueue queue;
    const int n_max = params_.n_write_max;
    for (std::uint8_t me = 0; me < 2; ++me) {
      const int k = detail::first_herald_attempt(nodes_[me].herald_probability, n_max, rng);
      if (k < n_max) {
        queue.push(static_cast<double>(k) * params_.dt_write_ns, me, EventKind::Herald, k);
      } else {
        queue.push(static_cast<double>(n_max - 1) * params_.dt_write_ns, me, EventKind::Exhausted, n_max - 1);
      }
    }

    const double latency = params_.latency_ns;
    bool failed = false;
    double failed_at = 0.0;

    while (!queue.empty()) {
      if (failed && queue.next_time() > failed_at) break;
      const detail::Event ev = queue.pop();
      const std::uint8_t me = ev.node;
      const std::uint8_t peer = me ^ 1;
      NodeState& node = state[me];

      switch (ev.kind) {
        case EventKind::Herald: {
          const int attempt = static_cast<int>(ev.payload);
          if (attempt > 0) node.transition(phase::Writing{attempt});
          herald_index[me] = attempt;
          node.herald_time_ns = ev.time_ns;
          node.transition(phase::Holding{ev.time_ns});
          queue.push(ev.time_ns + latency, peer, EventKind::ReadyArrives, ev.time_ns);
          break;
        }
        case EventKind::Exhausted:
          if (ev.payload > 0) node.transition(phase::Writing{static_cast<int>(ev.payload)});
          node.transition(phase::Done{false});
          failed = true;
          failed_at = ev.time_ns;
          break;
        case EventKind::ReadyArrives: {
          const auto* holding = std::get_if<phase::Holding>(&node.phase);
          if (holding == nullptr) break;  // the later node waits for go
          // The earlier herald (node A on a tie) coordinates the common read.
          const double mine = holding->herald_time_ns;
          const bool coordinator = mine < ev.payload || (mine == ev.payload && me == 0);
          if (coordinator) {
            node.transition(phase::Reading{});
            queue.push(ev.time_ns + latency, peer, EventKind::GoArrives);
            queue.push(ev.time_ns + latency + params_.dt_read_ns, me, EventKind::Read);
          }
          break;
        }
        case EventKind::GoArrives:
          node.transition(phase::Reading{});
          queue.push(ev.time_ns + params_.dt_read_ns, me, EventKind::Read);
          break;
        case EventKind::Read: {
          read_time[me] = ev.time_ns;
          hold[me] = ev.time_ns - *node.herald_time_ns;
          stokes[me] = sample_stokes(me, hold[me], rng);
          node.transition(phase::Done{stokes[me] > 0});
          break;
        }
      }
    }

    TrialOutcome out;
    out.herald_a = herald_index[0];
    out.herald_b = herald_index[1];
    out.hold_time_a_ns = hold[0];
    out.hold_time_b_ns = hold[1];
    out.stokes_a = stokes[0];
    out.stokes_b = stokes[1];
    out.read_time_a_ns = read_time[0];
    out.read_time_b_ns = read_time[1];
    out.four_fold = !failed && out.herald_a && out.herald_b && stokes[0] > 0 && stokes[1] > 0;
    return out;
  }

 private:
  int sample_stokes(std::uint8_t me, double hold_ns, SplitMix64& rng) const {
    const detail::NodeModel& m = nodes_[me];
    const double u = rng.uniform();
    int excitations = 0;
    while (excitations < static_cast<int>(kMaxQuanta) && u >= m.spin_cdf[excitations]) ++excitations;
    const double gamma =
        memory_retrieval_efficiency(m.gamma0, hold_ns, params_.decay_model, params_.tau_c_us);
    int photons = 0;
    for (int k = 0; k < excitations; ++k) photons += rng.bernoulli(gamma) ? 1 : 0;
    return photons;
  }

  ProtocolParams params_;
  std::array<detail::NodeModel, 2> nodes_;
};

inline TrialOutcome run_protocol_trial(const ProtocolParams& params, SplitMix64& rng) {
  return ProtocolSimulator(params).run(rng);
}

struct CoincidenceStats {
  std::uint64_t trials = 0;
  std::uint64_t four_fold_count = 0;
  std::uint64_t herald_a_count = 0;
  std::uint64_t herald_b_count = 0;

  double p4c_hat() const { return static_cast<double>(four_fold_count) / static_cast<double>(trials); }

  double std_err() const {
    const double p = p4c_hat();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  }

  CoincidenceStats& operator+=(const CoincidenceStats& o) {
    trials += o.trials;
    four_fold_count += o.four_fold_count;
    herald_a_count += o.herald_a_count;
    herald_b_count += o.herald_b_count;
    return *this;
  }

  friend bool operator==(const CoincidenceStats&, const CoincidenceStats&) = default;
};

struct CampaignOptions {
  // 0 selects std::thread::hardware_concurrency().
  unsigned workers = 0;
  // When set, trials run in index order on the calling thread and every
  // outcome is handed over.
  std::function<void(std::uint64_t, const TrialOutcome&)> on_trial;
};

// Trial k draws from substream (seed, k), and counts are summed, so the
// result does not depend on the number of workers.
inline CoincidenceStats simulate_campaign(const ProtocolParams& params, std::uint64_t n_trials, std::uint64_t seed,
                                          const CampaignOptions& options = {}) {
  if (n_trials == 0) throw DomainError("n_trials must be >= 1");
  const ProtocolSimulator sim(params);

  const auto run_range = [&](std::uint64_t begin, std::uint64_t end) {
    CoincidenceStats s;
    for (std::uint64_t k = begin; k < end; ++k) {
      SplitMix64 rng = substream(seed, streams::protocol_trial, k);
      const TrialOutcome out = sim.run(rng);
      ++s.trials;
      s.four_fold_count += out.four_fold ? 1 : 0;
      s.herald_a_count += out.herald_a ? 1 : 0;
      s.herald_b_count += out.herald_b ? 1 : 0;
      if (options.on_trial) options.on_trial(k, out);
    }
    return s;
  };

  unsigned workers = options.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.workers;
  if (options.on_trial || workers == 1 || n_trials < 1024) return run_range(0, n_trials);

  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, n_trials));
  std::vector<CoincidenceStats> partial(workers);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t begin = n_trials * w / workers;
    const std::uint64_t end = n_trials * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] { partial[w] = run_range(begin, end); });
  }
  pool.clear();

  CoincidenceStats total;
  for (const auto& s : partial) total += s;
  return total;
}

}  // namespace hsync
