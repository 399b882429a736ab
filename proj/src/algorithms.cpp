#include "ksim/algorithms.hpp"

#include <algorithm>
#include <stdexcept>

namespace ksim {

namespace {

std::vector<std::pair<NodePath, Rat>> massed_nodes_except(MassConfig const& config,
                                                          NodePath const& skip) {
  std::vector<std::pair<NodePath, Rat>> out;
  config.for_each([&](NodePath const& node, Rat const& m) {
    if (node != skip) out.emplace_back(node, m);
  });
  return out;
}

// Pulls from the nearest massed nodes until one unit has arrived;
// equidistant sources are drained in path order.
class GreedyNearest final : public OnlineAlgorithm {
 public:
  std::string name() const override { return "greedy"; }

  ServeDecision serve(MassConfig const& config, NodePath const& request,
                      TreeGeometry const& geom) override {
    ServeDecision d;
    Rat need = Rat(1) - config.node_mass(request);
    if (need <= 0) return d;
    std::vector<std::tuple<Rat, NodePath, Rat>> sources;  // (distance, node, mass)
    config.for_each([&](NodePath const& node, Rat const& m) {
      if (node != request) sources.emplace_back(geom.distance(node, request), node, m);
    });
    std::sort(sources.begin(), sources.end());
    for (auto const& [dist, node, mass] : sources) {
      if (need == 0) break;
      Rat take = rat_min(mass, need);
      d.transfers.push_back({node, request, take});
      need -= take;
    }
    return d;
  }
};

// Pulls the deficit from every massed node in proportion to its mass.
class ProportionalRefill final : public OnlineAlgorithm {
 public:
  std::string name() const override { return "proportional"; }

  ServeDecision serve(MassConfig const& config, NodePath const& request,
                      TreeGeometry const& /*geom*/) override {
    ServeDecision d;
    Rat need = Rat(1) - config.node_mass(request);
    if (need <= 0) return d;
    auto sources = massed_nodes_except(config, request);
    Rat available(0);
    for (auto const& [node, mass] : sources) available += mass;
    for (auto const& [node, mass] : sources)
      d.transfers.push_back({node, request, need * mass / available});
    return d;
  }
};

// Keeps all spare mass at the root and sends exactly the deficit per
// request; when the root reserve runs dry it retracts everything parked
// elsewhere back to the root (upward moves are not charged) and refills.
class Hoarder final : public OnlineAlgorithm {
 public:
  std::string name() const override { return "hoarder"; }

  ServeDecision serve(MassConfig const& config, NodePath const& request,
                      TreeGeometry const& /*geom*/) override {
    ServeDecision d;
    Rat need = Rat(1) - config.node_mass(request);
    if (need <= 0) return d;
    NodePath root = NodePath::root();
    if (request == root) {
      for (auto const& [node, mass] : massed_nodes_except(config, root))
        d.transfers.push_back({node, root, mass});
      return d;
    }
    Rat from_root = rat_min(config.node_mass(root), need);
    if (from_root > 0) d.transfers.push_back({root, request, from_root});
    if (from_root < need) {
      config.for_each([&](NodePath const& node, Rat const& mass) {
        if (node != root && node != request) d.transfers.push_back({node, root, mass});
      });
      d.transfers.push_back({root, request, need - from_root});
    }
    return d;
  }
};

// Double-coverage dynamics adapted to fractional mass: every mass cluster
// adjacent to the request (no other mass strictly between it and the
// request) moves toward it at equal speed; motion stops the instant one
// unit is present. Cluster positions are simulated continuously but only
// whole-edge progress materializes as transfers, so leftovers stay on
// nodes.
class DcTree final : public OnlineAlgorithm {
 public:
  std::string name() const override { return "dc-tree"; }

  ServeDecision serve(MassConfig const& config, NodePath const& request,
                      TreeGeometry const& geom) override {
    ServeDecision d;
    Rat at_request = config.node_mass(request);
    if (at_request >= 1) return d;

    struct Blob {
      std::vector<std::pair<NodePath, Rat>> components;  // (origin, mass)
      Rat mass;
      std::vector<NodePath> route;  // nodes after the start, ending at the request
      std::size_t next = 0;         // index of the next route node
      NodePath anchor;              // last node reached
      Rat offset = 0;               // distance traveled past anchor
      Rat dist = 0;                 // remaining distance to the request
      bool absorbed = false;
      bool frozen = false;
    };

    std::vector<Blob> blobs;
    config.for_each([&](NodePath const& node, Rat const& m) {
      if (node == request) return;
      Blob b;
      b.components.emplace_back(node, m);
      b.mass = m;
      b.anchor = node;
      PathSplit split = geom.decompose(node, request);
      for (auto const& e : split.up) b.route.push_back(e.child.parent());
      for (auto const& e : split.down) b.route.push_back(e.child);
      b.dist = geom.distance(node, request);
      blobs.push_back(std::move(b));
    });

    std::vector<std::size_t> arrivals;  // absorption order

    auto edge_len = [&](Blob const& b) {
      // Length of the edge the blob is currently traversing.
      NodePath const& ahead = b.route[b.next];
      NodePath const& lower = ahead.depth() > b.anchor.depth() ? ahead : b.anchor;
      return geom.edge_length(geom.edge_level(lower));
    };

    auto on_remaining_path = [&](Blob const& c, Blob const& b) {
      // Is c's position on b's remaining path, strictly ahead of b?
      if (c.offset == 0) {
        for (std::size_t j = b.next; j < b.route.size(); ++j)
          if (b.route[j] == c.anchor) return true;
        return false;
      }
      for (std::size_t j = b.next; j < b.route.size(); ++j) {
        NodePath const& from = j == b.next ? b.anchor : b.route[j - 1];
        if (from == c.anchor && b.route[j] == c.route[c.next]) {
          if (j == b.next) return c.offset > b.offset;
          return true;
        }
      }
      return false;
    };

    auto recompute_frozen = [&]() {
      for (auto& b : blobs) {
        if (b.absorbed) continue;
        b.frozen = false;
        for (auto const& c : blobs) {
          if (&c == &b || c.absorbed) continue;
          if (c.dist < b.dist && on_remaining_path(c, b)) {
            b.frozen = true;
            break;
          }
        }
      }
    };

    while (at_request < 1) {
      recompute_frozen();
      // Next event: a moving blob reaches its next node or a frozen blob
      // directly ahead on the same edge.
      Rat step(-1);
      for (auto const& b : blobs) {
        if (b.absorbed || b.frozen) continue;
        Rat to_node = edge_len(b) - b.offset;
        if (step < 0 || to_node < step) step = to_node;
        for (auto const& c : blobs) {
          if (&c == &b || c.absorbed || !c.frozen) continue;
          if (c.anchor == b.anchor && c.next == b.next && c.offset > b.offset &&
              c.route[c.next] == b.route[b.next]) {
            Rat gap = c.offset - b.offset;
            if (gap < step) step = gap;
          }
        }
      }
      if (step < 0) throw std::logic_error("dc-tree: no movable mass left");

      for (auto& b : blobs) {
        if (b.absorbed || b.frozen) continue;
        b.offset += step;
        b.dist -= step;
        if (b.offset == edge_len(b)) {
          b.anchor = b.route[b.next];
          ++b.next;
          b.offset = 0;
        }
      }
      // Absorptions at the request, in blob order.
      for (std::size_t i = 0; i < blobs.size(); ++i) {
        Blob& b = blobs[i];
        if (b.absorbed || b.anchor != request || b.offset != 0) continue;
        b.absorbed = true;
        at_request += b.mass;
        arrivals.push_back(i);
        if (at_request >= 1) break;
      }
      if (at_request >= 1) break;
      // Merge blobs that now share a position (node or mid-edge point).
      for (std::size_t i = 0; i < blobs.size(); ++i) {
        if (blobs[i].absorbed || blobs[i].mass == 0) continue;
        for (std::size_t j = i + 1; j < blobs.size(); ++j) {
          Blob& a = blobs[i];
          Blob& c = blobs[j];
          if (c.absorbed || c.mass == 0) continue;
          if (a.anchor == c.anchor && a.offset == c.offset && a.next == c.next) {
            a.mass += c.mass;
            for (auto& comp : c.components) a.components.push_back(comp);
            c.mass = 0;
            c.absorbed = true;  // retired into a
          }
        }
      }
    }

    for (std::size_t i : arrivals) {
      for (auto const& [origin, m] : blobs[i].components)
        d.transfers.push_back({origin, request, m});
    }
    for (auto const& b : blobs) {
      if (b.absorbed || b.mass == 0) continue;
      if (b.next == 0) continue;  // never crossed a node; partial edges snap back
      for (auto const& [origin, m] : b.components)
        if (origin != b.anchor) d.transfers.push_back({origin, b.anchor, m});
    }
    return d;
  }
};

}  // namespace

std::unique_ptr<OnlineAlgorithm> make_algorithm(std::string const& name,
                                                AlgorithmOptions const& options) {
  if (!options.empty())
    throw std::invalid_argument("algorithm '" + name + "' takes no options");
  if (name == "greedy") return std::make_unique<GreedyNearest>();
  if (name == "proportional") return std::make_unique<ProportionalRefill>();
  if (name == "dc-tree") return std::make_unique<DcTree>();
  if (name == "hoarder") return std::make_unique<Hoarder>();
  throw std::invalid_argument("unknown algorithm: '" + name + "'");
}

std::vector<std::string> builtin_algorithm_names() {
  return {"greedy", "proportional", "dc-tree", "hoarder"};
}

}  // namespace ksim
