#pragma once

// Structured-text (JSON) config formats. Every reader rejects unknown fields
// and validates the loaded value; every writer emits a document that reads
// back to an identical value. See docs/formats.md.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "magceptor/designer.hpp"
#include "magceptor/fsm.hpp"
#include "magceptor/landscape.hpp"
#include "magceptor/netbus.hpp"

namespace magceptor::io {

using Json = nlohmann::ordered_json;

Json to_json(const MagnetSpec& spec);
MagnetSpec magnet_spec_from_json(const Json& j);

Json to_json(const Topology& topology);
Topology topology_from_json(const Json& j);
Topology load_topology(const std::filesystem::path& path);

Json to_json(const Lattice& lattice);
Lattice lattice_from_json(const Json& j);
DesignConfig design_config_from_json(const Json& j);
Json to_json(const DesignConfig& config);
DesignConfig load_design_config(const std::filesystem::path& path);

Json to_json(const MachineDef& machine);
MachineDef machine_from_json(const Json& j, const std::filesystem::path& base_dir = {});
MachineDef load_machine(const std::filesystem::path& path);

Json to_json(const Campaign& campaign);
Campaign campaign_from_json(const Json& j);
Campaign load_campaign(const std::filesystem::path& path);

Json to_json(const DesignReport& report);

// Parses text as JSON, converting syntax errors into ParseError.
Json parse_json(const std::string& text, const std::string& origin);

}  // namespace magceptor::io
