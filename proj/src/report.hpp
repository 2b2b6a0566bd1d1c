#pragma once

#include "dolgopyat.hpp"

#include <json.hpp>

namespace afuw {

using ordered_json = nlohmann::ordered_json;

// Bumped when a payload's shape changes; consumers pin against it.
inline constexpr const char* kSchemaVersion = "1.0.0";

ordered_json ledger_to_json(const ConstantLedger& led);

// Common envelope: schema version, payload kind, map/roof labels, run inputs,
// and the full ledger snapshot. Payload fields get attached by the caller.
ordered_json report_header(const std::string& kind, const MapSpec& map,
                           const RoofFunction& roof, const ConstantLedger& led,
                           uint64_t seed, int grid);

void write_json(const std::string& path, const ordered_json& j);

// CSV with one header row; cells written at full round-trip precision.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

void ensure_dir(const std::string& dir);

}  // namespace afuw
