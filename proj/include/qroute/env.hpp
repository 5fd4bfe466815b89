#pragma once

#include <vector>

#include "qroute/vrp.hpp"

namespace qroute {

/// Dynamic decoding state. Value type: step() returns a new state.
struct EnvState {
  const Instance* instance = nullptr;
  std::vector<int> remaining_demands;
  int remaining_load = 0;
  int current_node = 0;
  std::vector<int> partial;  // visited sequence including the starting depot
  int step_count = 0;

  int unserved() const;
  bool terminal() const { return current_node == 0 && unserved() == 0; }
  bool operator==(const EnvState&) const = default;
};

EnvState reset(const Instance& instance);

/// Allowed next nodes. A customer is allowed when it still has demand that
/// fits the remaining load; the depot is allowed away from the depot, or once
/// all demand is served. Throws TerminalStateError on a terminal state.
std::vector<bool> feasible_mask(const EnvState& state);

struct StepResult {
  EnvState state;
  bool terminal = false;
};

/// Throws IllegalActionError for masked actions and InternalError once the
/// 2m+2 step cap is exceeded.
StepResult step(const EnvState& state, int action);

/// Negative route length of a completed, feasible episode.
double episode_reward(const Instance& instance, const Route& route);

/// Replays actions from reset; the returned state is terminal only if the
/// actions complete the episode.
EnvState replay(const Instance& instance, const std::vector<int>& actions);

}  // namespace qroute
