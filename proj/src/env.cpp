#include "qroute/env.hpp"

#include <numeric>
#include <string>

#include "qroute/errors.hpp"

namespace qroute {

int EnvState::unserved() const {
  return std::accumulate(remaining_demands.begin(), remaining_demands.end(), 0);
}

EnvState reset(const Instance& instance) {
  EnvState s;
  s.instance = &instance;
  s.remaining_demands = instance.demands();
  s.remaining_load = instance.capacity();
  s.current_node = 0;
  s.partial = {0};
  s.step_count = 0;
  return s;
}

std::vector<bool> feasible_mask(const EnvState& state) {
  if (state.terminal()) throw TerminalStateError("feasible_mask called on a terminal state");
  const auto n = state.remaining_demands.size();
  std::vector<bool> mask(n, false);
  bool work_left = false;
  for (std::size_t i = 1; i < n; ++i) {
    const int d = state.remaining_demands[i];
    if (d > 0) work_left = true;
    mask[i] = d > 0 && d <= state.remaining_load;
  }
  mask[0] = state.current_node != 0 || !work_left;
  return mask;
}

StepResult step(const EnvState& state, int action) {
  const auto mask = feasible_mask(state);
  if (action < 0 || static_cast<std::size_t>(action) >= mask.size() || !mask[action])
    throw IllegalActionError("action " + std::to_string(action) + " is masked");
  const int m = static_cast<int>(state.remaining_demands.size()) - 1;
  if (state.step_count + 1 > 2 * m + 2)
    throw InternalError("episode exceeded the 2m+2 step cap; the feasibility mask is inconsistent");

  StepResult out{state, false};
  EnvState& s = out.state;
  if (action == 0) {
    s.remaining_load = state.instance->capacity();
  } else {
    s.remaining_load -= s.remaining_demands[action];
    s.remaining_demands[action] = 0;
  }
  s.current_node = action;
  s.partial.push_back(action);
  ++s.step_count;
  out.terminal = s.terminal();
  return out;
}

double episode_reward(const Instance& instance, const Route& route) {
  const auto report = validate_solution(instance, route);
  if (!report.feasible) throw DomainError("episode_reward requires a completed feasible route");
  return -report.length;
}

EnvState replay(const Instance& instance, const std::vector<int>& actions) {
  EnvState s = reset(instance);
  for (int a : actions) s = step(s, a).state;
  return s;
}

}  // namespace qroute
