#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ksim/mass_config.hpp"

#include <random>

using namespace ksim;

namespace {
NodePath path(std::initializer_list<std::uint32_t> idx) {
  return NodePath(std::vector<std::uint32_t>(idx));
}
}  // namespace

TEST_CASE("initial configuration puts everything at the root") {
  auto a = MassConfig::initial(Rat(43, 2));
  CHECK(a.node_mass(NodePath::root()) == Rat(43, 2));
  CHECK(a.total() == Rat(43, 2));
  CHECK(MassConfig::initial(Rat(1)).node_mass(NodePath::root()) == 1);
  auto c = MassConfig::initial(Rat(462));
  CHECK(c.total() == 462);
  CHECK(c.touched_nodes() == 1);
  CHECK_THROWS(MassConfig::initial(Rat(1, 2)));
}

TEST_CASE("transfers pay per-level downward and upward cost") {
  TreeGeometry geom(1, Rat(1, 4));
  auto cfg = MassConfig::initial(Rat(2));
  CostLedger ledger;

  // Root to child, edge length 1: purely downward.
  auto d1 = cfg.apply({{NodePath::root(), path({0}), Rat(1, 2)}}, geom, &ledger);
  CHECK(d1.down_total == Rat(1, 2));
  CHECK(d1.up_total == 0);
  CHECK(d1.down_by_level.at(1) == Rat(1, 2));

  // Sibling leaves at level 1 of a depth-2 tree: one edge up, one down.
  TreeGeometry geom2(2, Rat(1, 4));
  auto cfg2 = MassConfig::initial(Rat(2));
  cfg2.apply({{NodePath::root(), path({0, 0}), Rat(1)}}, geom2, nullptr);
  auto d2 = cfg2.apply({{path({0, 0}), path({0, 1}), Rat(1)}}, geom2, nullptr);
  CHECK(d2.up_total == Rat(1, 4));
  CHECK(d2.down_total == Rat(1, 4));
  CHECK(d2.up_by_level.at(1) == Rat(1, 4));

  // Zero-amount transfers are rejected with the violating index.
  try {
    cfg.apply({{NodePath::root(), path({1}), Rat(1)},
               {NodePath::root(), path({2}), Rat(0)}},
              geom, nullptr);
    FAIL("expected TransferError");
  } catch (TransferError const& e) {
    CHECK(e.index() == 1);
  }

  // Insufficient mass reports the violating index too.
  auto cfg3 = MassConfig::initial(Rat(1));
  try {
    cfg3.apply({{NodePath::root(), path({0}), Rat(1)},
                {NodePath::root(), path({1}), Rat(1, 8)}},
               geom, nullptr);
    FAIL("expected TransferError");
  } catch (TransferError const& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("subtree mass sums the whole subtree") {
  TreeGeometry geom(2, Rat(1, 4));
  auto cfg = MassConfig::initial(Rat(43, 2));
  CHECK(cfg.subtree_mass(path({0})) == 0);
  cfg.apply({{NodePath::root(), path({0}), Rat(43, 2)}}, geom, nullptr);
  CHECK(cfg.subtree_mass(path({0})) == Rat(43, 2));
  cfg.apply({{path({0}), path({0, 2}), Rat(2)}}, geom, nullptr);
  CHECK(cfg.subtree_mass(path({0})) == Rat(43, 2));
  CHECK(cfg.subtree_mass(path({0, 2})) == 2);
  // Sibling subtrees are unaffected.
  CHECK(cfg.subtree_mass(path({1})) == 0);
}

TEST_CASE("a request is served only by mass at the exact node") {
  TreeGeometry geom(2, Rat(1, 4));
  auto cfg = MassConfig::initial(Rat(3));
  cfg.apply({{NodePath::root(), path({0}), Rat(1)}}, geom, nullptr);
  CHECK(cfg.served(path({0})));
  CHECK(!cfg.served(path({0, 0})));  // mass at the parent does not count
  cfg.apply({{NodePath::root(), path({0, 0}), Rat(2, 3)},
             {path({0}), path({0, 0}), Rat(1, 3)}},
            geom, nullptr);
  CHECK(cfg.served(path({0, 0})));
}

TEST_CASE("conservation, non-negativity and downward dominance on random traffic") {
  TreeGeometry geom(3, Rat(1, 4));
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d_idx(0, 2), d_depth(0, 3), d_num(1, 7);

  auto random_node = [&]() {
    NodePath p;
    int depth = d_depth(rng);
    for (int i = 0; i < depth; ++i) p = p.child(static_cast<std::uint32_t>(d_idx(rng)));
    return p;
  };

  auto cfg = MassConfig::initial(Rat(5));
  CostLedger ledger;
  for (int step = 0; step < 400; ++step) {
    // Pick a random massed node and push a random fraction somewhere else.
    std::vector<std::pair<NodePath, Rat>> massed;
    cfg.for_each([&](NodePath const& n, Rat const& m) { massed.emplace_back(n, m); });
    auto const& [src, avail] = massed[static_cast<std::size_t>(
        std::uniform_int_distribution<int>(0, static_cast<int>(massed.size()) - 1)(rng))];
    Rat amount = avail * Rat(d_num(rng), 8);
    if (amount == 0) continue;
    NodePath dst = random_node();
    if (dst == src) continue;
    cfg.apply({{src, dst, amount}}, geom, &ledger);

    CHECK(cfg.total() == 5);
    cfg.for_each([&](NodePath const&, Rat const& m) { CHECK(m > 0); });
    CHECK(ledger.up_total() <= ledger.down_total());
    // Per-level additivity of the ledger.
    Rat down_sum(0);
    for (auto const& [level, cost] : ledger.down_by_level()) down_sum += cost;
    CHECK(down_sum == ledger.down_total());
  }
}
