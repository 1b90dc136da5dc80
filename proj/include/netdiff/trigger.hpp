#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace netdiff {

struct ConstantThreshold {
  double delta = 0.02;
};
/// delta * exp(-q (t - p))
struct VanishingThreshold {
  double delta = 0.02;
  double q = 0.5;
  double p = 0.0;
};
/// delta + sigma |stored_i - stored_j|
struct StateDependentThreshold {
  double delta = 0.02;
  double sigma = 0.15;
};

using ThresholdRule = std::variant<ConstantThreshold, VanishingThreshold, StateDependentThreshold>;

inline double rule_delta(const ThresholdRule& r) {
  return std::visit([](const auto& v) { return v.delta; }, r);
}
inline double rule_sigma(const ThresholdRule& r) {
  if (auto* s = std::get_if<StateDependentThreshold>(&r)) return s->sigma;
  return 0.0;
}
inline std::string rule_kind(const ThresholdRule& r) {
  switch (r.index()) {
    case 0: return "constant";
    case 1: return "vanishing";
    default: return "state_dependent";
  }
}

inline void validate_rule(const ThresholdRule& r) {
  if (!(rule_delta(r) >= 0.0)) throw std::invalid_argument("trigger delta must be nonnegative");
  if (auto* v = std::get_if<VanishingThreshold>(&r); v && !(v->q > 0.0 && v->p >= 0.0))
    throw std::invalid_argument("vanishing trigger needs q > 0 and p >= 0");
  if (auto* s = std::get_if<StateDependentThreshold>(&r); s && !(s->sigma >= 0.0 && s->sigma < 0.5))
    throw std::invalid_argument("state-dependent trigger needs 0 <= sigma < 1/2");
}

/// Broadcast bookkeeping for one edge. Both endpoints are refreshed together.
struct EdgeChannel {
  int edge = 0;
  int i = 0;  // 1-based endpoints
  int j = 0;
  double stored_i = 0.0;
  double stored_j = 0.0;
  double last_event = -std::numeric_limits<double>::infinity();
  long event_count = 0;
  std::vector<double> event_times;
  std::vector<double> inter_event_log;

  bool fired_before() const { return event_count > 0; }
};

inline double threshold_value(const ThresholdRule& rule, double t, const EdgeChannel& ch) {
  return std::visit(
      [&](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, ConstantThreshold>) return r.delta;
        else if constexpr (std::is_same_v<R, VanishingThreshold>) return r.delta * std::exp(-r.q * (t - r.p));
        else return r.delta + r.sigma * std::abs(ch.stored_i - ch.stored_j);
      },
      rule);
}

/// Fires when either endpoint has moved at least thr away from its last broadcast.
inline bool should_fire(const EdgeChannel& ch, double current_i, double current_j, double thr) {
  return std::max(std::abs(current_i - ch.stored_i), std::abs(current_j - ch.stored_j)) >= thr;
}

inline void fire(EdgeChannel& ch, double t, double current_i, double current_j) {
  if (ch.fired_before() && !(t > ch.last_event))
    throw std::invalid_argument("event times must increase strictly (edge " + std::to_string(ch.edge) + ")");
  if (ch.fired_before()) ch.inter_event_log.push_back(t - ch.last_event);
  ch.stored_i = current_i;
  ch.stored_j = current_j;
  ch.last_event = t;
  ch.event_times.push_back(t);
  ++ch.event_count;
}

struct EdgeIntervalStats {
  int edge = 0;
  long events = 0;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

/// min / max / median of the inter-event times that end inside [t0, t1).
struct WindowStats {
  double t0 = 0.0;
  double t1 = 0.0;
  long count = 0;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct InterEventSummary {
  std::vector<EdgeIntervalStats> per_edge;
  std::vector<WindowStats> windows;
  long total_events = 0;
  double fraction = 0.0;  // events / (|E| * horizon / dt)
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double hi = *mid;
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline WindowStats window_stats(const std::vector<EdgeChannel>& channels, double t0, double t1) {
  WindowStats w{t0, t1, 0, 0.0, 0.0, 0.0};
  std::vector<double> vals;
  for (const auto& ch : channels)
    for (std::size_t k = 0; k < ch.inter_event_log.size(); ++k) {
      double end = ch.event_times[k + 1];
      if (end >= t0 && end < t1) vals.push_back(ch.inter_event_log[k]);
    }
  if (vals.empty()) return w;
  w.count = static_cast<long>(vals.size());
  auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
  w.min = *mn;
  w.max = *mx;
  w.median = detail::median_of(std::move(vals));
  return w;
}

inline InterEventSummary inter_event_stats(const std::vector<EdgeChannel>& channels, double horizon, double dt,
                                           double window = 1.0) {
  InterEventSummary s;
  for (const auto& ch : channels) {
    EdgeIntervalStats e{ch.edge, ch.event_count, 0.0, 0.0, 0.0};
    if (!ch.inter_event_log.empty()) {
      auto [mn, mx] = std::minmax_element(ch.inter_event_log.begin(), ch.inter_event_log.end());
      e.min = *mn;
      e.max = *mx;
      e.mean = std::accumulate(ch.inter_event_log.begin(), ch.inter_event_log.end(), 0.0) /
               static_cast<double>(ch.inter_event_log.size());
    }
    s.per_edge.push_back(e);
    s.total_events += ch.event_count;
  }
  const double steps = std::round(horizon / dt);
  if (!channels.empty() && steps > 0) s.fraction = static_cast<double>(s.total_events) / (channels.size() * steps);
  if (window > 0.0)
    for (double t0 = 0.0; t0 < horizon - 1e-12; t0 += window) {
      double t1 = t0 + window >= horizon - 1e-12 ? horizon + dt : t0 + window;
      s.windows.push_back(window_stats(channels, t0, t1));
    }
  return s;
}

}  // namespace netdiff
