#include "mgor/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "mgor/errors.hpp"

namespace mgor::io {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ValidationError(path + ": " + what);
}

const json& require_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    return j;
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

std::string string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

template <class T, class F>
void read(const json& obj, const char* key, const std::string& path, T& into, F&& parse) {
    if (auto it = obj.find(key); it != obj.end()) into = parse(*it, path + "." + key);
}

void read_number(const json& obj, const char* key, const std::string& path, double& into) {
    read(obj, key, path, into, number);
}

json encode_matrix(const Mat3& m) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
    return rows;
}

std::string_view shape_name(magnetics::MagnetShape s) {
    return s == magnetics::MagnetShape::Cylinder ? "cylinder" : "rectangular_prism";
}

json encode_dipole(const Dipole& d) { return {{"position", encode(d.position)}, {"moment", encode(d.moment)}}; }

} // namespace

void require_only(const json& j, std::initializer_list<const char*> allowed, const std::string& path) {
    require_object(j, path);
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) fail(path, "unknown field '" + key + "'");
    }
}

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

json encode(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

json encode(const RigidTransform& t) {
    return {{"position", encode(t.position)}, {"rotation", encode_matrix(t.rotation)}};
}

json encode(const MagnetSpec& s) {
    json dims = s.shape == magnetics::MagnetShape::Cylinder ? json{s.dimensions.x(), s.dimensions.y()}
                                                            : encode(s.dimensions);
    return {{"shape", shape_name(s.shape)},
            {"dimensions", dims},
            {"remanence", s.remanence},
            {"magnetization_axis", encode(s.magnetization_axis)}};
}

json encode(const ChainModel& m) {
    json mags = json::array();
    for (const auto& em : m.end_magnets) mags.push_back({{"spec", encode(em.spec)}, {"mount", encode(em.mount)}});
    return {{"cells", m.cells},
            {"links_per_cell", m.links_per_cell},
            {"link_length", m.link_length},
            {"link_width", m.link_width},
            {"link_thickness", m.link_thickness},
            {"link_mass", m.link_mass},
            {"hinge_stiffness", m.hinge_stiffness},
            {"hinge_rest_angles", m.hinge_rest_angles},
            {"end_magnets", mags},
            {"mobility",
             {{"base_translation", m.mobility.base_translation},
              {"base_rotation", m.mobility.base_rotation},
              {"hinge", m.mobility.hinge}}},
            {"contact",
             {{"distance", m.contact.distance},
              {"stiffness", m.contact.stiffness},
              {"overlap", m.contact.overlap}}},
            {"hinge_limit", m.hinge_limit},
            {"magnet_subdivisions", m.magnet_subdivisions}};
}

json encode(const Config& q) { return {{"base", encode(q.base)}, {"hinge_angles", q.hinge_angles}}; }

json encode(const Environment& env) {
    json j = json::object();
    json epm = json::array();
    for (const auto& d : env.epm) epm.push_back(encode_dipole(d));
    j["epm"] = epm;
    if (env.plates) {
        j["plates"] = {{"normal", encode(env.plates->normal)},
                       {"force", env.plates->force},
                       {"stiffness", env.plates->stiffness}};
    }
    j["gravity"] = encode(env.gravity);
    return j;
}

json encode(const SimParams& p) {
    return {{"timestep", p.timestep},
            {"max_step_translation", p.max_step_translation},
            {"max_step_rotation", p.max_step_rotation},
            {"max_steps", p.max_steps},
            {"convergence_threshold", p.convergence_threshold},
            {"singularity_guard", p.singularity_guard}};
}

json encode(const EpmRig& rig) {
    return {{"cylinder", encode(rig.cylinder)}, {"spacing", rig.spacing}, {"polarity", rig.polarity}};
}

json encode(const ControlPrimitive& p) {
    json j = {{"kind", to_string(p.kind)}, {"duration", p.duration}};
    switch (p.kind) {
        case PrimitiveKind::Hold: break;
        case PrimitiveKind::Translate:
            j["axis"] = encode(p.axis);
            j["speed"] = p.speed;
            break;
        case PrimitiveKind::Rotate:
            j["axis"] = encode(p.rotation_axis);
            j["rate"] = p.rate;
            break;
        case PrimitiveKind::TranslateRotate:
            j["axis"] = encode(p.axis);
            j["speed"] = p.speed;
            j["rotation_axis"] = encode(p.rotation_axis);
            j["rate"] = p.rate;
            break;
    }
    return j;
}

json encode(const ControlScript& s) {
    json prims = json::array();
    for (const auto& p : s.primitives) prims.push_back(encode(p));
    return {{"name", s.name},
            {"description", s.description},
            {"initial_pose", encode(s.initial_pose)},
            {"primitives", prims}};
}

json encode(const EnergyBreakdown& e) {
    return {{"elastic", e.elastic},
            {"ipm_ipm", e.ipm_ipm},
            {"ipm_epm", e.ipm_epm},
            {"contact", e.contact},
            {"external", e.external},
            {"magnetic", e.magnetic()},
            {"total", e.total()}};
}

json encode(const TransitionReport& r) {
    json first = json::object();
    for (const auto& [label, t] : r.first_seen) first[std::string(to_string(label))] = t;
    // run-length timeline: [label, first step, last step] with 1-based step numbers
    json runs = json::array();
    std::size_t start = 0;
    for (std::size_t i = 1; i <= r.timeline.size(); ++i) {
        if (i == r.timeline.size() || r.timeline[i] != r.timeline[start]) {
            runs.push_back({to_string(r.timeline[start]), start + 1, i});
            start = i;
        }
    }
    return {{"final_label", to_string(r.final_label)},
            {"steps", r.timeline.size()},
            {"first_seen", first},
            {"min_end_gap", r.min_end_gap},
            {"flip_events", r.flip_events},
            {"timeline", runs}};
}

json encode(const LandscapeAxis& a) {
    return {{"hinges", a.hinges}, {"min", a.min}, {"max", a.max}, {"resolution", a.resolution}};
}

Vec3 decode_vec3(const json& j, const std::string& path) {
    const auto v = numbers(j, path);
    if (v.size() != 3) fail(path, "expected 3 numbers");
    return {v[0], v[1], v[2]};
}

RigidTransform decode_pose(const json& j, const std::string& path) {
    require_only(j, {"position", "rotation", "rotation_vector"}, path);
    RigidTransform t;
    read(j, "position", path, t.position, decode_vec3);
    if (j.contains("rotation") && j.contains("rotation_vector")) {
        fail(path, "give either rotation or rotation_vector, not both");
    }
    if (auto it = j.find("rotation"); it != j.end()) {
        const std::string p = path + ".rotation";
        if (!it->is_array() || it->size() != 3) fail(p, "expected 3 rows of 3 numbers");
        for (int r = 0; r < 3; ++r) {
            const Vec3 row = decode_vec3((*it)[static_cast<std::size_t>(r)], p + "[" + std::to_string(r) + "]");
            t.rotation.row(r) = row.transpose();
        }
        if (orthonormality_error(t.rotation) > 1e-9 || t.rotation.determinant() < 0.0) {
            fail(p, "not a proper rotation matrix");
        }
    }
    if (auto it = j.find("rotation_vector"); it != j.end()) {
        t.rotation = exp_so3(decode_vec3(*it, path + ".rotation_vector"));
    }
    return t;
}

MagnetSpec decode_magnet(const json& j, const std::string& path) {
    require_only(j, {"shape", "dimensions", "remanence", "magnetization_axis"}, path);
    MagnetSpec s;
    const std::string shape = j.contains("shape") ? string(j["shape"], path + ".shape") : "rectangular_prism";
    if (shape == "cylinder") {
        s.shape = magnetics::MagnetShape::Cylinder;
    } else if (shape != "rectangular_prism") {
        fail(path + ".shape", "expected 'rectangular_prism' or 'cylinder'");
    }
    if (!j.contains("dimensions")) fail(path, "missing field 'dimensions'");
    const auto d = numbers(j["dimensions"], path + ".dimensions");
    const std::size_t want = s.shape == magnetics::MagnetShape::Cylinder ? 2 : 3;
    if (d.size() != want) fail(path + ".dimensions", "expected " + std::to_string(want) + " numbers");
    s.dimensions = Vec3(d[0], d[1], want == 3 ? d[2] : 0.0);
    read_number(j, "remanence", path, s.remanence);
    read(j, "magnetization_axis", path, s.magnetization_axis, decode_vec3);
    try {
        s.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return s;
}

ChainModel decode_model(const json& j, const std::string& path) {
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "calibrated") return calibrated_model();
        if (name == "uncalibrated") return with_cell_stiffness(calibrated_model(), kUncalibratedStiffness);
        fail(path, "unknown model preset '" + name + "'");
    }
    require_only(j, {"preset", "cell_stiffness", "cells", "links_per_cell", "link_length", "link_width",
                     "link_thickness", "link_mass", "hinge_stiffness", "hinge_rest_angles", "end_magnets",
                     "mobility", "contact", "hinge_limit", "magnet_subdivisions"},
                 path);
    ChainModel m = j.contains("preset") ? decode_model(j["preset"], path + ".preset") : calibrated_model();
    if (auto it = j.find("cell_stiffness"); it != j.end()) {
        m = with_cell_stiffness(m, number(*it, path + ".cell_stiffness"));
    }
    read(j, "cells", path, m.cells, integer);
    read(j, "links_per_cell", path, m.links_per_cell, integer);
    read_number(j, "link_length", path, m.link_length);
    read_number(j, "link_width", path, m.link_width);
    read_number(j, "link_thickness", path, m.link_thickness);
    read_number(j, "link_mass", path, m.link_mass);
    read(j, "hinge_stiffness", path, m.hinge_stiffness, numbers);
    read(j, "hinge_rest_angles", path, m.hinge_rest_angles, numbers);
    if (auto it = j.find("end_magnets"); it != j.end()) {
        const std::string p = path + ".end_magnets";
        if (!it->is_array() || it->size() != 2) fail(p, "expected exactly two end magnets");
        for (std::size_t i = 0; i < 2; ++i) {
            const std::string pi = p + "[" + std::to_string(i) + "]";
            require_only((*it)[i], {"spec", "mount"}, pi);
            if (!(*it)[i].contains("spec")) fail(pi, "missing field 'spec'");
            m.end_magnets[i].spec = decode_magnet((*it)[i]["spec"], pi + ".spec");
            read((*it)[i], "mount", pi, m.end_magnets[i].mount, decode_pose);
        }
    }
    if (auto it = j.find("mobility"); it != j.end()) {
        const std::string p = path + ".mobility";
        require_only(*it, {"base_translation", "base_rotation", "hinge"}, p);
        read_number(*it, "base_translation", p, m.mobility.base_translation);
        read_number(*it, "base_rotation", p, m.mobility.base_rotation);
        read_number(*it, "hinge", p, m.mobility.hinge);
    }
    if (auto it = j.find("contact"); it != j.end()) {
        const std::string p = path + ".contact";
        require_only(*it, {"distance", "stiffness", "overlap"}, p);
        read_number(*it, "distance", p, m.contact.distance);
        read_number(*it, "stiffness", p, m.contact.stiffness);
        read_number(*it, "overlap", p, m.contact.overlap);
    }
    read_number(j, "hinge_limit", path, m.hinge_limit);
    read(j, "magnet_subdivisions", path, m.magnet_subdivisions, integer);
    try {
        m.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return m;
}

Config named_config(const std::string& name, const ChainModel& model, const SimParams& params) {
    if (name == "flat") return Config::flat(model);
    if (name == "folded") return folded_start(model);
    if (name == "locked_gamma") return locked_gamma(model, params);
    throw ValidationError("unknown named configuration '" + name + "' (flat, folded, locked_gamma)");
}

Config decode_config(const json& j, const ChainModel& model, const std::string& path) {
    if (j.is_string()) {
        try {
            return named_config(j.get<std::string>(), model, SimParams{});
        } catch (const ValidationError& e) {
            fail(path, e.what());
        }
    }
    require_only(j, {"base", "hinge_angles"}, path);
    Config q = Config::flat(model);
    read(j, "base", path, q.base, decode_pose);
    read(j, "hinge_angles", path, q.hinge_angles, numbers);
    try {
        validate_config(model, q);
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return q;
}

EpmRig decode_rig(const json& j, const std::string& path) {
    require_only(j, {"cylinder", "spacing", "polarity"}, path);
    EpmRig rig;
    read(j, "cylinder", path, rig.cylinder, decode_magnet);
    read_number(j, "spacing", path, rig.spacing);
    read_number(j, "polarity", path, rig.polarity);
    try {
        rig.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return rig;
}

Environment decode_environment(const json& j, const std::string& path) {
    require_only(j, {"epm", "rig", "rig_pose", "plates", "gravity"}, path);
    Environment env;
    if (auto it = j.find("epm"); it != j.end()) {
        const std::string p = path + ".epm";
        if (!it->is_array()) fail(p, "expected an array of dipoles");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string pi = p + "[" + std::to_string(i) + "]";
            require_only((*it)[i], {"position", "moment"}, pi);
            Dipole d;
            read((*it)[i], "position", pi, d.position, decode_vec3);
            read((*it)[i], "moment", pi, d.moment, decode_vec3);
            env.epm.push_back(d);
        }
    }
    if (j.contains("rig") || j.contains("rig_pose")) {
        const EpmRig rig = j.contains("rig") ? decode_rig(j["rig"], path + ".rig") : EpmRig{};
        const RigidTransform pose =
            j.contains("rig_pose") ? decode_pose(j["rig_pose"], path + ".rig_pose") : fig3_script().initial_pose;
        for (const auto& d : rig.dipoles(pose)) env.epm.push_back(d);
    }
    if (auto it = j.find("plates"); it != j.end()) {
        const std::string p = path + ".plates";
        require_only(*it, {"normal", "force", "stiffness"}, p);
        SqueezePlates plates;
        read(*it, "normal", p, plates.normal, decode_vec3);
        read_number(*it, "force", p, plates.force);
        read_number(*it, "stiffness", p, plates.stiffness);
        env.plates = plates;
    }
    read(j, "gravity", path, env.gravity, decode_vec3);
    try {
        env.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return env;
}

SimParams decode_params(const json& j, const std::string& path) {
    require_only(j, {"timestep", "max_step_translation", "max_step_rotation", "max_steps",
                     "convergence_threshold", "singularity_guard"},
                 path);
    SimParams p;
    read_number(j, "timestep", path, p.timestep);
    read_number(j, "max_step_translation", path, p.max_step_translation);
    read_number(j, "max_step_rotation", path, p.max_step_rotation);
    if (auto it = j.find("max_steps"); it != j.end()) {
        if (!it->is_number_integer()) fail(path + ".max_steps", "expected an integer");
        p.max_steps = it->get<long>();
    }
    read_number(j, "convergence_threshold", path, p.convergence_threshold);
    read_number(j, "singularity_guard", path, p.singularity_guard);
    try {
        p.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return p;
}

ControlPrimitive decode_primitive(const json& j, const std::string& path) {
    require_object(j, path);
    if (!j.contains("kind")) fail(path, "missing field 'kind'");
    if (!j.contains("duration")) fail(path, "missing field 'duration'");
    ControlPrimitive p;
    try {
        p.kind = primitive_kind_from_string(string(j["kind"], path + ".kind"));
    } catch (const ValidationError& e) {
        fail(path + ".kind", e.what());
    }
    p.duration = number(j["duration"], path + ".duration");
    auto need = [&](const char* key) -> const json& {
        if (!j.contains(key)) fail(path, std::string("missing field '") + key + "'");
        return j[key];
    };
    switch (p.kind) {
        case PrimitiveKind::Hold:
            require_only(j, {"kind", "duration"}, path);
            break;
        case PrimitiveKind::Translate:
            require_only(j, {"kind", "duration", "axis", "speed"}, path);
            p.axis = decode_vec3(need("axis"), path + ".axis");
            p.speed = number(need("speed"), path + ".speed");
            break;
        case PrimitiveKind::Rotate:
            require_only(j, {"kind", "duration", "axis", "rate"}, path);
            p.rotation_axis = decode_vec3(need("axis"), path + ".axis");
            p.rate = number(need("rate"), path + ".rate");
            break;
        case PrimitiveKind::TranslateRotate:
            require_only(j, {"kind", "duration", "axis", "speed", "rotation_axis", "rate"}, path);
            p.axis = decode_vec3(need("axis"), path + ".axis");
            p.speed = number(need("speed"), path + ".speed");
            p.rotation_axis = decode_vec3(need("rotation_axis"), path + ".rotation_axis");
            p.rate = number(need("rate"), path + ".rate");
            break;
    }
    try {
        p.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return p;
}

ControlScript decode_script(const json& j, const std::string& path) {
    require_only(j, {"name", "description", "initial_pose", "primitives"}, path);
    ControlScript s;
    read(j, "name", path, s.name, string);
    read(j, "description", path, s.description, string);
    if (!j.contains("initial_pose")) fail(path, "missing field 'initial_pose'");
    s.initial_pose = decode_pose(j["initial_pose"], path + ".initial_pose");
    if (!j.contains("primitives") || !j["primitives"].is_array()) fail(path, "missing array 'primitives'");
    const auto& prims = j["primitives"];
    for (std::size_t i = 0; i < prims.size(); ++i) {
        s.primitives.push_back(decode_primitive(prims[i], path + ".primitives[" + std::to_string(i) + "]"));
    }
    try {
        s.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return s;
}

LandscapeAxis decode_axis(const json& j, const std::string& path) {
    require_only(j, {"hinges", "min", "max", "resolution"}, path);
    LandscapeAxis a;
    if (!j.contains("hinges") || !j["hinges"].is_array()) fail(path, "missing array 'hinges'");
    for (std::size_t i = 0; i < j["hinges"].size(); ++i) {
        a.hinges.push_back(integer(j["hinges"][i], path + ".hinges[" + std::to_string(i) + "]"));
    }
    if (!j.contains("min") || !j.contains("max")) fail(path, "missing 'min' or 'max'");
    a.min = number(j["min"], path + ".min");
    a.max = number(j["max"], path + ".max");
    read(j, "resolution", path, a.resolution, integer);
    return a;
}

json read_json_file(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError(file + ": file not found or unreadable");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(file + ": malformed JSON: " + e.what());
    }
}

namespace {

const std::map<std::string, std::set<std::string>>& option_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"relax", {"sample_interval"}},
        {"unfold", {"sample_interval"}},
        {"squeeze", {"force", "axis", "plate_stiffness"}},
        {"sequence", {"script", "rig", "time_scale", "sample_interval"}},
        {"landscape", {"x", "y", "base"}},
        {"self_assembly", {"stiffness", "min_gap", "max_gap", "tolerance"}},
        {"calibrate", {"target_gap", "tolerance"}},
    };
    return keys;
}

} // namespace

ScenarioFile parse_scenario(const json& j) {
    require_only(j, {"kind", "name", "description", "model", "initial", "environment", "params", "options"},
                 "scenario");
    ScenarioFile s;
    s.source = j;
    if (!j.contains("kind")) fail("scenario", "missing field 'kind'");
    s.kind = string(j["kind"], "scenario.kind");
    const auto& keys = option_keys();
    const auto allowed = keys.find(s.kind);
    if (allowed == keys.end()) {
        std::string list;
        for (const auto& [k, v] : keys) list += (list.empty() ? "" : ", ") + k;
        fail("scenario.kind", "unknown kind '" + s.kind + "' (expected one of " + list + ")");
    }
    s.model = j.contains("model") ? decode_model(j["model"]) : calibrated_model();
    s.params = j.contains("params") ? decode_params(j["params"]) : SimParams{};
    if (j.contains("initial")) {
        const auto& init = j["initial"];
        s.initial = init.is_string() ? named_config(init.get<std::string>(), s.model, s.params)
                                     : decode_config(init, s.model);
    } else {
        s.initial = Config::flat(s.model);
    }
    s.environment = j.contains("environment") ? decode_environment(j["environment"]) : Environment{};
    if (j.contains("options")) {
        require_object(j["options"], "scenario.options");
        for (const auto& [key, value] : j["options"].items()) {
            if (!allowed->second.count(key)) fail("scenario.options", "unknown field '" + key + "' for kind " + s.kind);
        }
        s.options = j["options"];
    }
    return s;
}

ScenarioFile load_scenario(const std::string& file) { return parse_scenario(read_json_file(file)); }

std::string trajectory_header(const ChainModel& model) {
    std::string h = "t,base_x,base_y,base_z,base_rx,base_ry,base_rz";
    for (int i = 0; i < model.hinge_count(); ++i) h += ",hinge_" + std::to_string(i);
    h += ",end_gap_m,state,E_elastic,E_mag,E_total";
    return h;
}

void write_trajectory_csv(std::ostream& os, const ChainModel& model,
                          const std::vector<TrajectorySample>& samples) {
    os << trajectory_header(model) << '\n';
    for (const auto& s : samples) {
        const Eigen::AngleAxisd aa(s.q.base.rotation);
        const Vec3 rv = aa.angle() == 0.0 ? Vec3::Zero() : Vec3(aa.angle() * aa.axis());
        os << format_double(s.t);
        for (int i = 0; i < 3; ++i) os << ',' << format_double(s.q.base.position(i));
        for (int i = 0; i < 3; ++i) os << ',' << format_double(rv(i));
        for (double h : s.q.hinge_angles) os << ',' << format_double(h);
        os << ',' << format_double(s.end_gap) << ',' << to_string(s.label) << ',' << format_double(s.energy.elastic)
           << ',' << format_double(s.energy.magnetic()) << ',' << format_double(s.energy.total()) << '\n';
    }
}

} // namespace mgor::io
