#include "ksim/trace.hpp"

#include <fstream>
#include <stdexcept>

namespace ksim::trace {

Json rat_field(Rat const& r) { return rat_str(r); }

Rat rat_from(Json const& j) { return parse_rat(j.get<std::string>()); }

Json level_map(std::map<int, Rat> const& by_level) {
  Json out = Json::object();
  for (auto const& [level, cost] : by_level)
    if (cost != 0) out[std::to_string(level)] = rat_field(cost);
  return out;
}

std::map<int, Rat> level_map_from(Json const& j) {
  std::map<int, Rat> out;
  for (auto const& [key, val] : j.items()) out[std::stoi(key)] = rat_from(val);
  return out;
}

namespace {

char const* kind_name(AdvEvent::Kind k) {
  switch (k) {
    case AdvEvent::Kind::InstanceStart: return "instance_start";
    case AdvEvent::Kind::PhaseStart: return "phase_start";
    case AdvEvent::Kind::Mark: return "mark";
    case AdvEvent::Kind::PhaseComplete: return "phase_complete";
    case AdvEvent::Kind::EpochStart: return "epoch_start";
    case AdvEvent::Kind::EpochComplete: return "epoch_complete";
  }
  return "?";
}

AdvEvent::Kind kind_from(std::string const& s) {
  if (s == "instance_start") return AdvEvent::Kind::InstanceStart;
  if (s == "phase_start") return AdvEvent::Kind::PhaseStart;
  if (s == "mark") return AdvEvent::Kind::Mark;
  if (s == "phase_complete") return AdvEvent::Kind::PhaseComplete;
  if (s == "epoch_start") return AdvEvent::Kind::EpochStart;
  if (s == "epoch_complete") return AdvEvent::Kind::EpochComplete;
  throw std::invalid_argument("unknown event record kind: " + s);
}

}  // namespace

bool is_event_record(Json const& j) {
  std::string r = j.value("record", "");
  return r == "instance_start" || r == "phase_start" || r == "mark" ||
         r == "phase_complete" || r == "epoch_start" || r == "epoch_complete";
}

Json event_record(AdvEvent const& e) {
  Json j;
  j["record"] = kind_name(e.kind);
  j["instance"] = e.instance.str();
  switch (e.kind) {
    case AdvEvent::Kind::InstanceStart:
      j["depth"] = e.instance_depth;
      j["cap"] = rat_field(e.cap);
      j["phase0_marked"] = e.phase0_marked;
      break;
    case AdvEvent::Kind::PhaseStart:
      j["phase"] = e.phase;
      j["fresh"] = e.child;
      break;
    case AdvEvent::Kind::Mark:
      j["phase"] = e.phase;
      j["j"] = e.j;
      j["child"] = e.child;
      j["capped_mass"] = rat_field(e.capped_mass);
      if (e.bound) j["bound"] = rat_field(*e.bound);
      break;
    case AdvEvent::Kind::PhaseComplete:
      j["phase"] = e.phase;
      j["marked"] = e.marked;
      j["dropped"] = e.dropped;
      j["down_by_level"] = level_map(e.down_by_level);
      j["up_by_level"] = level_map(e.up_by_level);
      break;
    case AdvEvent::Kind::EpochStart:
      j["epoch"] = e.epoch;
      j["depth"] = e.instance_depth;
      break;
    case AdvEvent::Kind::EpochComplete:
      j["epoch"] = e.epoch;
      j["down_by_level"] = level_map(e.down_by_level);
      j["up_by_level"] = level_map(e.up_by_level);
      break;
  }
  return j;
}

AdvEvent event_from(Json const& j) {
  AdvEvent e;
  e.kind = kind_from(j.at("record").get<std::string>());
  e.instance = NodePath::parse(j.at("instance").get<std::string>());
  switch (e.kind) {
    case AdvEvent::Kind::InstanceStart:
      e.instance_depth = j.at("depth").get<int>();
      e.cap = rat_from(j.at("cap"));
      e.phase0_marked = j.at("phase0_marked").get<std::vector<std::uint32_t>>();
      break;
    case AdvEvent::Kind::PhaseStart:
      e.phase = j.at("phase").get<std::uint64_t>();
      e.child = j.at("fresh").get<std::uint32_t>();
      break;
    case AdvEvent::Kind::Mark:
      e.phase = j.at("phase").get<std::uint64_t>();
      e.j = j.at("j").get<int>();
      e.child = j.at("child").get<std::uint32_t>();
      e.capped_mass = rat_from(j.at("capped_mass"));
      if (j.contains("bound")) e.bound = rat_from(j.at("bound"));
      break;
    case AdvEvent::Kind::PhaseComplete:
      e.phase = j.at("phase").get<std::uint64_t>();
      e.marked = j.at("marked").get<std::vector<std::uint32_t>>();
      e.dropped = j.at("dropped").get<std::uint32_t>();
      e.down_by_level = level_map_from(j.at("down_by_level"));
      e.up_by_level = level_map_from(j.at("up_by_level"));
      break;
    case AdvEvent::Kind::EpochStart:
      e.epoch = j.at("epoch").get<std::uint64_t>();
      e.instance_depth = j.at("depth").get<int>();
      break;
    case AdvEvent::Kind::EpochComplete:
      e.epoch = j.at("epoch").get<std::uint64_t>();
      e.down_by_level = level_map_from(j.at("down_by_level"));
      e.up_by_level = level_map_from(j.at("up_by_level"));
      break;
  }
  return e;
}

Json request_record(std::uint64_t m, NodePath const& node,
                    std::vector<Transfer> const& transfers, LedgerDelta const& delta) {
  Json j;
  j["record"] = "request";
  j["m"] = m;
  j["node"] = node.str();
  Json ts = Json::array();
  for (auto const& t : transfers)
    ts.push_back(Json::array({t.from.str(), t.to.str(), rat_field(t.amount)}));
  j["transfers"] = std::move(ts);
  j["down"] = level_map(delta.down_by_level);
  j["up"] = level_map(delta.up_by_level);
  return j;
}

std::vector<Transfer> transfers_from(Json const& request_rec) {
  std::vector<Transfer> out;
  for (auto const& t : request_rec.at("transfers")) {
    out.push_back({NodePath::parse(t.at(0).get<std::string>()),
                   NodePath::parse(t.at(1).get<std::string>()),
                   rat_from(t.at(2))});
  }
  return out;
}

Json budget_record(std::string const& reason) {
  Json j;
  j["record"] = "budget";
  j["reason"] = reason;
  return j;
}

Json violation_record(std::uint64_t m, std::string const& detail) {
  Json j;
  j["record"] = "contract_violation";
  j["m"] = m;
  j["detail"] = detail;
  return j;
}

std::string to_line(Json const& j) { return j.dump(); }

void write_jsonl(std::string const& path, std::vector<Json> const& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  for (auto const& j : records) out << to_line(j) << '\n';
}

std::vector<Json> read_jsonl(std::string const& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read trace: " + path);
  std::vector<Json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(Json::parse(line));
  }
  return out;
}

}  // namespace ksim::trace
