#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fracq/rng.hpp"

namespace fracq::sim {

// Full parameterization of both processes: fractionality order, birth/death
// rates and the initial state (i for the queue, m for the linear process).
struct ModelParams {
  double alpha;
  double lambda;
  double mu;
  long initial_state;

  double theta() const { return lambda + mu; }
  double birth_probability() const { return lambda / (lambda + mu); }
  void validate() const;
};

enum class EventType { birth, death };

struct Event {
  double time;
  EventType type;
  long state_after;
};

enum class TerminalReason { max_events, extinction, horizon, target_state };

struct PathSample {
  ModelParams params;
  std::vector<Event> events;
  TerminalReason terminal_reason;
};

// First satisfied bound wins; at least one must be set (extinction alone does
// not bound the supercritical regimes).
struct StopRule {
  std::optional<std::size_t> max_events;
  std::optional<double> time_horizon;
  std::optional<long> target_state;
  void validate() const;
};

struct SojournRecord {
  long state_before;
  double duration;
  EventType type;
};

struct SojournData {
  std::vector<SojournRecord> records;
  std::size_t n_births = 0;
  std::size_t n_deaths = 0;
  std::size_t size() const { return records.size(); }
};

// Fractional linear birth-death process: in state k the sojourn is
// Mittag-Leffler with rate (lambda+mu)k, then the state moves to k+1 with
// probability lambda/(lambda+mu), else k-1. State 0 is absorbing.
template <class Stream>
PathSample simulate_linear_bd(const ModelParams& params, Stream& stream,
                              const StopRule& stop) {
  params.validate();
  stop.validate();
  PathSample path{params, {}, TerminalReason::extinction};
  if (stop.max_events) path.events.reserve(*stop.max_events);
  long state = params.initial_state;
  double now = 0.0;
  const double p_birth = params.birth_probability();
  while (state > 0) {
    const double sojourn =
        rng::sample_ml_sojourn(stream, params.alpha, params.theta() * state);
    const double next_time = now + sojourn;
    if (stop.time_horizon && next_time > *stop.time_horizon) {
      path.terminal_reason = TerminalReason::horizon;
      return path;
    }
    now = next_time;
    const bool is_birth = stream.uniform01() < p_birth;
    state += is_birth ? 1 : -1;
    path.events.push_back({now, is_birth ? EventType::birth : EventType::death, state});
    if (stop.target_state && state == *stop.target_state) {
      path.terminal_reason = TerminalReason::target_state;
      return path;
    }
    if (stop.max_events && path.events.size() >= *stop.max_events) {
      path.terminal_reason = TerminalReason::max_events;
      return path;
    }
  }
  path.terminal_reason = TerminalReason::extinction;
  return path;
}

// Fractional M/M/1 queue: states k >= 1 hold a Mittag-Leffler(alpha, lambda+mu)
// sojourn and then move +-1; state 0 holds Mittag-Leffler(alpha, lambda) and the
// next event is necessarily an arrival.
template <class Stream>
PathSample simulate_mm1(const ModelParams& params, Stream& stream, const StopRule& stop) {
  params.validate();
  stop.validate();
  if (!stop.max_events && !stop.time_horizon && !stop.target_state) {
    throw std::invalid_argument("simulate_mm1 requires a stop bound");
  }
  PathSample path{params, {}, TerminalReason::max_events};
  if (stop.max_events) path.events.reserve(*stop.max_events);
  long state = params.initial_state;
  double now = 0.0;
  const double p_birth = params.birth_probability();
  for (;;) {
    const bool at_boundary = (state == 0);
    const double rate = at_boundary ? params.lambda : params.theta();
    const double next_time = now + rng::sample_ml_sojourn(stream, params.alpha, rate);
    if (stop.time_horizon && next_time > *stop.time_horizon) {
      path.terminal_reason = TerminalReason::horizon;
      return path;
    }
    now = next_time;
    EventType type = EventType::birth;
    if (!at_boundary && stream.uniform01() >= p_birth) type = EventType::death;
    state += (type == EventType::birth) ? 1 : -1;
    path.events.push_back({now, type, state});
    if (stop.target_state && state == *stop.target_state) {
      path.terminal_reason = TerminalReason::target_state;
      return path;
    }
    if (stop.max_events && path.events.size() >= *stop.max_events) {
      path.terminal_reason = TerminalReason::max_events;
      return path;
    }
  }
}

// One-dimensional-law oracle for the fractional queue: run the classical
// (alpha = 1) queue up to the random clock E^alpha(t) and report its state.
template <class Stream>
long simulate_mm1_subordinated(const ModelParams& params, Stream& stream, double t) {
  params.validate();
  if (!(t >= 0.0)) throw std::invalid_argument("simulate_mm1_subordinated requires t >= 0");
  const double tau = rng::sample_inverse_subordinator(stream, params.alpha, t);
  long state = params.initial_state;
  double now = 0.0;
  const double p_birth = params.birth_probability();
  for (;;) {
    const bool at_boundary = (state == 0);
    now += stream.exponential(at_boundary ? params.lambda : params.theta());
    if (now > tau) return state;
    if (at_boundary || stream.uniform01() < p_birth) {
      ++state;
    } else {
      --state;
    }
  }
}

// Inter-event durations with the originating state and event type. The first
// duration is measured from time zero.
SojournData extract_sojourns(const PathSample& path);

// CSV export: header `event_index,event_time,event_type,state_after`,
// '.' decimal separator, 17 significant digits.
void write_path_csv(const PathSample& path, std::ostream& out);

}  // namespace fracq::sim
