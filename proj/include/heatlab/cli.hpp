#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace heatlab::cli {

// Exit codes: 0 success, 1 configuration error, 2 numerical admissibility
// error, 3 internal invariant violation.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitAdmissibility = 2;
inline constexpr int kExitInternal = 3;

// Runs one experiment described by the JSON config. Reports are written under
// config["out"] and the main JSON report is also returned through *report
// when non-null. The config schema is validated first; unknown keys are
// rejected with the offending path in the message.
int run(const nlohmann::json& config, nlohmann::json* report = nullptr);

// Parses a space descriptor {dim, kind, p?, weights?, facets?, euclid_scale?}.
// Throws std::invalid_argument on schema violations.
class NormedSpaceFactory;

nlohmann::json default_config(const std::string& command);

}  // namespace heatlab::cli
