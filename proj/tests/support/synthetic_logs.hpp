#pragma once

#include <functional>
#include <string>

#include "collab/orchestrator.hpp"

// A run log whose prices come from price(t, firm), t = 1..periods.
inline collab::RunLog synthetic_log(const std::string& id, int periods,
                                    const std::function<double(int, int)>& price,
                                    std::vector<std::string> prefixes = {"P1", "P1"},
                                    double scale = 1.0) {
  collab::RunLog log;
  log.config.run_id = id;
  log.config.prefixes = prefixes;
  log.config.scale = scale;
  log.config.market = collab::MarketParams::benchmark(scale);
  for (int t = 1; t <= periods; ++t) {
    collab::PeriodRecord r;
    r.period = t;
    for (std::size_t i = 0; i < prefixes.size(); ++i) {
      collab::AgentRecord a;
      a.value = price(t, static_cast<int>(i));
      a.profit = 10.0 * scale;
      r.agents.push_back(a);
    }
    log.records.push_back(r);
  }
  return log;
}
