#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mgor/chain.hpp"
#include "mgor/control.hpp"
#include "mgor/scenarios.hpp"
#include "mgor/states.hpp"

// JSON encoding of the library types. Decoders reject unknown keys and wrong types
// with a ValidationError naming the JSON path. Units are SI throughout.
namespace mgor::io {

using nlohmann::json;

json encode(const Vec3& v);
json encode(const RigidTransform& t);
json encode(const MagnetSpec& s);
json encode(const ChainModel& m);
json encode(const Config& q);
json encode(const Environment& env);
json encode(const SimParams& p);
json encode(const EpmRig& rig);
json encode(const ControlPrimitive& p);
json encode(const ControlScript& s);
json encode(const EnergyBreakdown& e);
json encode(const TransitionReport& r);
json encode(const LandscapeAxis& a);

Vec3 decode_vec3(const json& j, const std::string& path);
RigidTransform decode_pose(const json& j, const std::string& path);
MagnetSpec decode_magnet(const json& j, const std::string& path);
ChainModel decode_model(const json& j, const std::string& path = "model");
Config decode_config(const json& j, const ChainModel& model, const std::string& path = "initial");
Environment decode_environment(const json& j, const std::string& path = "environment");
SimParams decode_params(const json& j, const std::string& path = "params");
EpmRig decode_rig(const json& j, const std::string& path = "rig");
ControlPrimitive decode_primitive(const json& j, const std::string& path);
ControlScript decode_script(const json& j, const std::string& path = "script");
LandscapeAxis decode_axis(const json& j, const std::string& path);

/// Parse a file; missing or malformed files raise ValidationError.
json read_json_file(const std::string& file);

/// A scenario document for `simulate` and `landscape`.
///
/// `model` may be the string "calibrated"; `initial` may be one of the named
/// starts "flat", "folded", "locked_gamma". Field sets per kind are in docs/formats.md.
struct ScenarioFile {
    std::string kind;  // relax | unfold | squeeze | sequence | landscape | self_assembly
    ChainModel model;
    Config initial;
    Environment environment;
    SimParams params;
    json options = json::object();
    json source;  // the document as given, for echoing
};

ScenarioFile parse_scenario(const json& j);
ScenarioFile load_scenario(const std::string& file);

/// Named initial configurations.
Config named_config(const std::string& name, const ChainModel& model, const SimParams& params);

/// Rejects keys of `j` outside `allowed`. `j` must be an object.
void require_only(const json& j, std::initializer_list<const char*> allowed, const std::string& path);

/// Shortest round-trip decimal for a double (locale independent).
std::string format_double(double x);

/// Header and rows of the trajectory CSV.
std::string trajectory_header(const ChainModel& model);
void write_trajectory_csv(std::ostream& os, const ChainModel& model,
                          const std::vector<TrajectorySample>& samples);

} // namespace mgor::io
