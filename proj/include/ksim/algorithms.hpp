#pragma once

#include "ksim/mass_config.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace ksim {

// A serve step: the ordered transfers the algorithm performs. After
// application at least one unit of mass must sit at the requested node.
struct ServeDecision {
  std::vector<Transfer> transfers;
};

// The pluggable fractional online algorithm contract. Implementations see
// only the current configuration and the request (no lookahead); they must
// be deterministic given their state so recorded runs replay bit-for-bit.
class OnlineAlgorithm {
 public:
  virtual ~OnlineAlgorithm() = default;
  virtual std::string name() const = 0;
  virtual ServeDecision serve(MassConfig const& config, NodePath const& request,
                              TreeGeometry const& geom) = 0;
};

using AlgorithmOptions = std::map<std::string, std::string>;

// Builtins: "greedy", "proportional", "dc-tree", "hoarder".
std::unique_ptr<OnlineAlgorithm> make_algorithm(std::string const& name,
                                                AlgorithmOptions const& options = {});

std::vector<std::string> builtin_algorithm_names();

}  // namespace ksim
