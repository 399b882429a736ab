#pragma once

#include "ksim/adversary.hpp"
#include "ksim/mass_config.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ksim::trace {

// One JSON object per line; insertion order preserved so identical runs
// produce byte-identical files. Exact rationals travel as "p/q" strings.
using Json = nlohmann::ordered_json;

inline constexpr char const* kSchema = "ksim-trace/1";

Json rat_field(Rat const& r);
Rat rat_from(Json const& j);

Json level_map(std::map<int, Rat> const& by_level);
std::map<int, Rat> level_map_from(Json const& j);

Json event_record(AdvEvent const& e);
// Reconstructs the adversary event from its record (used by the verifier
// and the offline replay).
AdvEvent event_from(Json const& j);
bool is_event_record(Json const& j);

Json request_record(std::uint64_t m, NodePath const& node,
                    std::vector<Transfer> const& transfers, LedgerDelta const& delta);
std::vector<Transfer> transfers_from(Json const& request_rec);

Json budget_record(std::string const& reason);
Json violation_record(std::uint64_t m, std::string const& detail);

std::string to_line(Json const& j);
void write_jsonl(std::string const& path, std::vector<Json> const& records);
std::vector<Json> read_jsonl(std::string const& path);

}  // namespace ksim::trace
