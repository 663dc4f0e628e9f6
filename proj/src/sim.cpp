#include "fracq/sim.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace fracq::sim {

void ModelParams::validate() const {
  if (!(alpha > 0.0) || alpha > 1.0 || !std::isfinite(alpha)) {
    throw std::invalid_argument("model requires alpha in (0, 1]");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("model requires lambda > 0");
  }
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("model requires mu > 0");
  }
  if (initial_state < 0) {
    throw std::invalid_argument("model requires initial_state >= 0");
  }
}

void StopRule::validate() const {
  if (!max_events && !time_horizon && !target_state) {
    throw std::invalid_argument("stop rule must bound events, time or target state");
  }
  if (max_events && *max_events == 0) {
    throw std::invalid_argument("max_events must be >= 1");
  }
  if (time_horizon && !(*time_horizon >= 0.0)) {
    throw std::invalid_argument("time_horizon must be >= 0");
  }
  if (target_state && *target_state < 0) {
    throw std::invalid_argument("target_state must be >= 0");
  }
}

SojournData extract_sojourns(const PathSample& path) {
  SojournData data;
  data.records.reserve(path.events.size());
  long state = path.params.initial_state;
  double previous_time = 0.0;
  for (const Event& event : path.events) {
    data.records.push_back({state, event.time - previous_time, event.type});
    if (event.type == EventType::birth) {
      ++data.n_births;
    } else {
      ++data.n_deaths;
    }
    state = event.state_after;
    previous_time = event.time;
  }
  return data;
}

void write_path_csv(const PathSample& path, std::ostream& out) {
  out << "event_index,event_time,event_type,state_after\n";
  char buf[64];
  for (std::size_t i = 0; i < path.events.size(); ++i) {
    const Event& e = path.events[i];
    std::snprintf(buf, sizeof(buf), "%.17g", e.time);
    out << i << ',' << buf << ',' << (e.type == EventType::birth ? "birth" : "death")
        << ',' << e.state_after << '\n';
  }
}

}  // namespace fracq::sim
