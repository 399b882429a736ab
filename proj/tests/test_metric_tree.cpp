#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ksim/params.hpp"
#include "ksim/tree.hpp"

#include <mpfr.h>

#include <random>

using namespace ksim;

namespace {

// Independent ceiling of exp(x) for small integer x, at fixed high precision
// with both rounding directions (oracle for the b derivation).
long ceil_exp_oracle(long x) {
  long out[2];
  for (int side = 0; side < 2; ++side) {
    mpfr_t v;
    mpfr_init2(v, 512);
    mpfr_set_si(v, x, MPFR_RNDN);
    mpfr_exp(v, v, side == 0 ? MPFR_RNDD : MPFR_RNDU);
    mpfr_ceil(v, v);
    out[side] = mpfr_get_si(v, MPFR_RNDN);
    mpfr_clear(v);
  }
  REQUIRE(out[0] == out[1]);
  return out[0];
}

NodePath path(std::initializer_list<std::uint32_t> idx) {
  return NodePath(std::vector<std::uint32_t>(idx));
}

}  // namespace

TEST_CASE("parameter derivation matches the exact schedule") {
  REQUIRE(ceil_exp_oracle(3) == 21);

  auto p0 = derive_params(Rat(1), 0);
  CHECK(p0.branching == 21);
  CHECK(p0.offline_servers == 1);
  CHECK(p0.online_mass == 1);
  CHECK(p0.paper_schedule);

  auto p1 = derive_params(Rat(1), 1);
  CHECK(p1.branching == 21);
  CHECK(p1.offline_servers == 21);
  CHECK(p1.online_mass == Rat(43, 2));

  auto p2 = derive_params(Rat(1), 2);
  CHECK(p2.branching == 21);
  CHECK(p2.offline_servers == 441);
  CHECK(p2.online_mass == 462);
  CHECK(p2.slack == Rat(1, 84));
  CHECK(p2.scale == Rat(1, 4));
}

TEST_CASE("derivation is monotone in depth: h multiplies by b") {
  for (int depth = 0; depth < 5; ++depth) {
    auto p = derive_params(Rat(1), depth);
    auto q = derive_params(Rat(1), depth + 1);
    CHECK(q.offline_servers == p.offline_servers * 21);
  }
}

TEST_CASE("derivation rejects degenerate inputs") {
  CHECK_THROWS(derive_params(Rat(0), 1));  // b = 1
  ParamOverrides ov;
  ov.branching = 1;
  CHECK_THROWS(derive_params(Rat(1), 1, ov));
  ParamOverrides ov2;
  ov2.online_mass = Rat(1, 2);
  CHECK_THROWS(derive_params(Rat(1), 1, ov2));
}

TEST_CASE("overriding b recomputes h and k; schedule flag drops") {
  ParamOverrides ov;
  ov.branching = 3;
  auto p = derive_params(Rat(1), 2, ov);
  CHECK(p.branching == 3);
  CHECK(p.offline_servers == 9);
  CHECK(p.online_mass == 12);  // 9 * (1 + 2/6)
  CHECK(!p.paper_schedule);
  // rho below 1 is allowed but never paper-schedule.
  auto q = derive_params(Rat(1, 2), 1);
  CHECK(!q.paper_schedule);
}

TEST_CASE("lazy children and leaf errors") {
  TreeGeometry geom(2, Rat(1, 4));
  CHECK(child_of(geom, NodePath::root(), 0) == path({0}));
  CHECK(child_of(geom, path({0}), 7) == path({0, 7}));
  CHECK_THROWS(child_of(geom, path({0, 0}), 1));  // leaf
}

TEST_CASE("distances on the scaled tree") {
  TreeGeometry geom(2, Rat(1, 4));
  CHECK(geom.distance(NodePath::root(), path({0})) == 1);
  CHECK(geom.distance(path({0, 3}), path({0, 3})) == 0);
  CHECK(geom.distance(path({0, 0}), path({1, 0})) == Rat(5, 2));
  CHECK(geom.distance(path({0, 0}), path({0, 1})) == Rat(1, 2));
  CHECK(geom.down_distance(NodePath::root(), path({0, 0})) == Rat(5, 4));
  CHECK(geom.down_distance(path({0, 0}), NodePath::root()) == 0);
}

TEST_CASE("edge levels and lengths") {
  TreeGeometry geom(3, Rat(1, 4));
  CHECK(geom.edge_level(path({5})) == 3);
  CHECK(geom.edge_level(path({5, 0, 1})) == 1);
  CHECK(geom.edge_length(3) == 1);
  CHECK(geom.edge_length(2) == Rat(1, 4));
  CHECK(geom.edge_length(1) == Rat(1, 16));
}

TEST_CASE("star shape hangs unscaled subtrees at unit distance") {
  TreeGeometry star(3, Rat(1, 4), TreeShape::Star);
  CHECK(star.edge_length(3) == 1);       // root edges
  CHECK(star.edge_length(2) == 1);       // top edges of the hanging subtrees
  CHECK(star.edge_length(1) == Rat(1, 4));
}

TEST_CASE("path decomposition splits at the lca") {
  TreeGeometry geom(2, Rat(1, 4));
  auto split = geom.decompose(NodePath::root(), path({2, 1}));
  CHECK(split.up.empty());
  CHECK(split.down.size() == 2);
  CHECK(split.down[0].child == path({2}));
  CHECK(split.down[0].level == 2);
  auto mirror = geom.decompose(path({2, 1}), NodePath::root());
  CHECK(mirror.down.empty());
  CHECK(mirror.up.size() == 2);
  auto siblings = geom.decompose(path({0, 0}), path({0, 1}));
  CHECK(siblings.up.size() == 1);
  CHECK(siblings.down.size() == 1);
  CHECK(siblings.up[0].level == 1);
  Rat total(0);
  for (auto const& e : siblings.up) total += e.length;
  for (auto const& e : siblings.down) total += e.length;
  CHECK(total == geom.distance(path({0, 0}), path({0, 1})));
}

TEST_CASE("metric properties on random triples") {
  TreeGeometry geom(3, Rat(1, 4));
  std::mt19937_64 rng(7);
  auto random_node = [&]() {
    std::uniform_int_distribution<int> d_depth(0, 3), d_idx(0, 3);
    NodePath p;
    int depth = d_depth(rng);
    for (int i = 0; i < depth; ++i) p = p.child(static_cast<std::uint32_t>(d_idx(rng)));
    return p;
  };
  for (int t = 0; t < 500; ++t) {
    NodePath a = random_node(), b = random_node(), c = random_node();
    CHECK(geom.distance(a, b) == geom.distance(b, a));
    CHECK(geom.distance(a, b) <= geom.distance(a, c) + geom.distance(c, b));
    CHECK((geom.distance(a, b) == 0) == (a == b));
    // The charged part also satisfies the triangle inequality.
    CHECK(geom.down_distance(a, b) <= geom.down_distance(a, c) + geom.down_distance(c, b));
  }
}

TEST_CASE("root-to-leaf depth stays below 4/3 and subtrees below 1") {
  for (int depth = 1; depth <= 6; ++depth) {
    TreeGeometry geom(depth, Rat(1, 4));
    Rat full = geom.root_to_leaf_depth();
    CHECK(full < Rat(4, 3));
    // Distance from any depth-1 node to the leaves below it.
    Rat inner(0);
    for (int level = 1; level < depth; ++level) inner += geom.edge_length(level);
    CHECK(inner <= 1);
  }
}

TEST_CASE("node path serialization round-trips") {
  CHECK(NodePath::root().str() == "");
  CHECK(path({3, 0, 7}).str() == "3/0/7");
  CHECK(NodePath::parse("") == NodePath::root());
  CHECK(NodePath::parse("3/0/7") == path({3, 0, 7}));
  CHECK(NodePath::parse("12") == path({12}));
}

TEST_CASE("epoch schedule from the offline budget") {
  // ceil(e^16) computed independently.
  mpfr_t v;
  mpfr_init2(v, 512);
  mpfr_set_si(v, 16, MPFR_RNDN);
  mpfr_exp(v, v, MPFR_RNDU);
  mpfr_ceil(v, v);
  Int h;
  mpfr_get_z(h.get_mpz_t(), v, MPFR_RNDN);
  mpfr_clear(v);
  REQUIRE(h == 8886111);

  auto s = epoch_schedule_for_servers(h);
  CHECK(s.depth_index == 4);
  CHECK(s.branching == 2);
  CHECK(!s.degenerate);
  CHECK(s.feasibility_ok);
  CHECK(s.ratio_approx30.substr(0, 17) == "0.231049060186648");

  auto s100 = epoch_schedule_for_servers(Int(100));
  CHECK(s100.depth_index == 2);
  CHECK(s100.branching == 1);
  CHECK(s100.degenerate);

  auto s2 = epoch_schedule_for_servers(Int(2));
  CHECK(s2.depth_index == 0);
  CHECK(s2.degenerate);
}

TEST_CASE("rational parsing and formatting") {
  CHECK(rat_str(parse_rat("43/2")) == "43/2");
  CHECK(rat_str(parse_rat("0.25")) == "1/4");
  CHECK(rat_str(parse_rat("-3.5")) == "-7/2");
  CHECK(rat_str(parse_rat("462")) == "462");
  CHECK_THROWS(parse_rat("x"));
  CHECK_THROWS(parse_rat(""));
}
