#ifndef ESMETA_TRANSITION_HPP_
#define ESMETA_TRANSITION_HPP_

#include <vector>

namespace esmeta {

struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

}  // namespace esmeta

#endif  // ESMETA_TRANSITION_HPP_
