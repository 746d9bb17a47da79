#include "mgor/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "mgor/errors.hpp"
#include "mgor/io.hpp"
#include "mgor/scenarios.hpp"
#include "mgor/teleop_server.hpp"
#include "mgor/wpt.hpp"

namespace mgor::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed(double x, int sig = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", sig, x);
    return buf;
}

// ---- scenario runs -------------------------------------------------------

struct Run {
    std::string kind;
    json inputs;  // resolved scenario document; `simulate inputs.json` repeats the run
    json result;
    ChainModel model;
    std::optional<std::vector<TrajectorySample>> samples;
    std::vector<std::pair<std::string, std::string>> files;  // extra name -> contents
    std::vector<std::string> summary;
};

double option_number(const json& options, const char* key, double fallback) {
    if (!options.contains(key)) return fallback;
    if (!options[key].is_number()) throw ValidationError(std::string("scenario.options.") + key + ": expected a number");
    return options[key].get<double>();
}

json resolved(const io::ScenarioFile& s, json options) {
    return {{"kind", s.kind},
            {"model", io::encode(s.model)},
            {"initial", io::encode(s.initial)},
            {"environment", io::encode(s.environment)},
            {"params", io::encode(s.params)},
            {"options", std::move(options)}};
}

Run start(const io::ScenarioFile& s, json options) {
    Run run;
    run.kind = s.kind;
    run.inputs = resolved(s, std::move(options));
    run.model = s.model;
    return run;
}

json final_state(const ChainModel& model, const Config& q, const Environment& env, const SimParams& params) {
    return {{"config", io::encode(q)},
            {"label", to_string(classify(model, q))},
            {"end_gap", end_gap(model, q)},
            {"energy", io::encode(total_energy(model, q, env, params))}};
}

void require_no_field(const io::ScenarioFile& s) {
    if (!s.environment.epm.empty() || s.environment.plates) {
        throw ValidationError("scenario.environment: kind " + s.kind + " runs with no EPM and no plates");
    }
}

double positive_interval(const json& options, double fallback) {
    const double v = option_number(options, "sample_interval", fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("scenario.options.sample_interval: must be > 0");
    return v;
}

Run run_relax(const io::ScenarioFile& s) {
    const double interval = positive_interval(s.options, 0.5);
    const long every = std::max(1L, std::lround(interval / s.params.timestep));
    const double dt = s.params.timestep;
    std::vector<TrajectorySample> samples;
    auto sample = [&](const Config& q, long k) {
        samples.push_back(make_sample(s.model, q, static_cast<double>(k) * dt, {}, s.environment, s.params, {}));
    };
    sample(s.initial, 0);
    long last = 0;
    const auto r = relax(s.model, s.initial, s.environment, s.params, [&](const Config& q, long k) {
        if (k % every == 0) {
            sample(q, k);
            last = k;
        }
        return false;
    });
    if (last != r.steps) sample(r.config, r.steps);

    Run run = start(s, {{"sample_interval", interval}});
    run.result = {{"kind", s.kind},
                  {"steps", r.steps},
                  {"settled", r.settled},
                  {"residual", r.residual},
                  {"final", final_state(s.model, r.config, s.environment, s.params)}};
    run.summary.push_back("final state: " + std::string(to_string(classify(s.model, r.config))));
    run.summary.push_back("steps: " + std::to_string(r.steps) + (r.settled ? " (settled)" : " (step limit)"));
    run.samples = std::move(samples);
    return run;
}

Run run_unfold(const io::ScenarioFile& s) {
    require_no_field(s);
    const double interval = positive_interval(s.options, 0.5);
    const auto u = unfold_scenario(s.model, s.initial, s.params, interval);
    std::vector<TrajectorySample> samples;
    for (std::size_t i = 0; i < u.times.size(); ++i) {
        samples.push_back(make_sample(s.model, u.trajectory[i], u.times[i], {}, Environment{}, s.params, {}));
    }
    Run run = start(s, {{"sample_interval", interval}});
    run.result = {{"kind", s.kind},
                  {"final_label", to_string(u.final_label)},
                  {"steps", u.steps},
                  {"settled", u.settled},
                  {"final", final_state(s.model, u.trajectory.back(), Environment{}, s.params)}};
    run.summary.push_back("final state: " + std::string(to_string(u.final_label)));
    run.summary.push_back("steps: " + std::to_string(u.steps) + (u.settled ? " (settled)" : " (step limit)"));
    run.samples = std::move(samples);
    return run;
}

Vec3 axis_from_json(const json& j, const std::string& path) {
    if (j.is_string()) {
        const auto a = j.get<std::string>();
        if (a == "x") return Vec3::UnitX();
        if (a == "y") return Vec3::UnitY();
        if (a == "z") return Vec3::UnitZ();
        throw ValidationError(path + ": unknown axis '" + a + "' (x, y, z or a 3-vector)");
    }
    return io::decode_vec3(j, path);
}

std::string axis_name(const Vec3& a) {
    if (a == Vec3::UnitX()) return "x";
    if (a == Vec3::UnitY()) return "y";
    if (a == Vec3::UnitZ()) return "z";
    return io::encode(a).dump();
}

Run run_squeeze(const io::ScenarioFile& s) {
    require_no_field(s);
    std::vector<double> forces{2.0, 6.0, 10.0};
    if (s.options.contains("force")) {
        const auto& f = s.options["force"];
        forces.clear();
        if (f.is_number()) {
            forces.push_back(f.get<double>());
        } else if (f.is_array()) {
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (!f[i].is_number()) throw ValidationError("scenario.options.force[" + std::to_string(i) + "]: expected a number");
                forces.push_back(f[i].get<double>());
            }
        } else {
            throw ValidationError("scenario.options.force: expected a number or an array of numbers");
        }
    }
    std::vector<Vec3> axes{Vec3::UnitX(), Vec3::UnitZ()};
    if (s.options.contains("axis")) {
        const auto& a = s.options["axis"];
        axes.clear();
        if (a.is_array() && !a.empty() && !a[0].is_number()) {
            for (std::size_t i = 0; i < a.size(); ++i) axes.push_back(axis_from_json(a[i], "scenario.options.axis[" + std::to_string(i) + "]"));
        } else {
            axes.push_back(axis_from_json(a, "scenario.options.axis"));
        }
    }
    if (forces.empty() || axes.empty()) throw ValidationError("scenario.options: need at least one force and one axis");
    SqueezeOptions so;
    so.plate_stiffness = option_number(s.options, "plate_stiffness", so.plate_stiffness);

    json reports = json::array();
    json axes_json = json::array();
    bool all_recovered = true;
    std::vector<std::string> lines;
    for (const auto& axis : axes) {
        const auto name = axis_name(axis);
        axes_json.push_back(name.size() == 1 ? json(name) : io::encode(axis));
        double previous = -1.0;
        bool monotone = true;
        for (double f : forces) {
            const auto r = squeeze_test(s.model, s.initial, f, axis, s.params, so);
            monotone = monotone && r.loaded.max_hinge_change >= previous;
            previous = r.loaded.max_hinge_change;
            all_recovered = all_recovered && r.recovered;
            reports.push_back({{"force", r.force},
                               {"axis", axis_name(axis)},
                               {"loaded", {{"max_hinge_change", r.loaded.max_hinge_change},
                                           {"max_link_displacement", r.loaded.max_link_displacement}}},
                               {"residual", {{"max_hinge_change", r.residual.max_hinge_change},
                                             {"max_link_displacement", r.residual.max_link_displacement}}},
                               {"gap_change", r.gap_change},
                               {"loaded_label", to_string(r.loaded_label)},
                               {"released_label", to_string(r.released_label)},
                               {"recovered", r.recovered}});
            lines.push_back("axis " + axis_name(axis) + " force " + fixed(f) + " N: deflection " +
                            fixed(r.loaded.max_hinge_change) + " rad, " + (r.recovered ? "recovered" : "NOT recovered"));
        }
        if (!monotone) lines.push_back("axis " + axis_name(axis) + ": deflection not monotone in force");
    }
    json opts = {{"force", forces}, {"axis", axes_json}, {"plate_stiffness", so.plate_stiffness}};
    Run run = start(s, opts);
    run.result = {{"kind", s.kind}, {"reports", reports}, {"all_recovered", all_recovered}};
    run.summary = std::move(lines);
    return run;
}

ControlScript script_option(const json& options) {
    if (!options.contains("script")) return fig3_script();
    const auto& j = options["script"];
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "fig3") return fig3_script();
        return io::decode_script(io::read_json_file(name), name);
    }
    return io::decode_script(j, "scenario.options.script");
}

Run run_sequence(const io::ScenarioFile& s) {
    require_no_field(s);
    const ControlScript script = script_option(s.options);
    ExecuteOptions eo;
    if (s.options.contains("rig")) eo.rig = io::decode_rig(s.options["rig"], "scenario.options.rig");
    const double scale = option_number(s.options, "time_scale", 1.0);
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("scenario.options.time_scale: must be > 0");
    eo.sample_interval = positive_interval(s.options, 0.1);
    const ControlScript run_script = scale == 1.0 ? script : time_scaled(script, scale);

    auto r = execute(run_script, s.model, s.initial, s.params, eo);
    json opts = {{"script", io::encode(script)},
                 {"rig", io::encode(eo.rig)},
                 {"time_scale", scale},
                 {"sample_interval", eo.sample_interval}};
    Run run = start(s, opts);
    const auto& last = r.samples.back();
    Environment env;
    env.epm = eo.rig.dipoles(last.epm_pose);
    run.result = {{"kind", s.kind},
                  {"script", script.name},
                  {"report", io::encode(r.report)},
                  {"final", final_state(s.model, last.q, env, s.params)},
                  {"final_epm_pose", io::encode(last.epm_pose)}};
    run.summary.push_back("script: " + script.name + " (" + std::to_string(run_script.primitives.size()) +
                          " primitives, " + fixed(run_script.total_duration()) + " s)");
    run.summary.push_back("final state: " + std::string(to_string(r.report.final_label)));
    run.summary.push_back("flip events: " + std::to_string(r.report.flip_events));
    run.summary.push_back("min end gap: " + fixed(r.report.min_end_gap * 1e3) + " mm");
    run.samples = std::move(r.samples);
    return run;
}

Run run_landscape(const io::ScenarioFile& s) {
    if (!s.options.contains("x") || !s.options.contains("y")) {
        throw ValidationError("scenario.options: landscape needs axes 'x' and 'y'");
    }
    LandscapeSlice slice;
    slice.x = io::decode_axis(s.options["x"], "scenario.options.x");
    slice.y = io::decode_axis(s.options["y"], "scenario.options.y");
    slice.base = s.options.contains("base") ? io::decode_config(s.options["base"], s.model, "scenario.options.base")
                                            : s.initial;
    slice.validate(s.model);
    const auto grid = energy_landscape(s.model, slice, s.environment, s.params);
    const auto minima = find_local_minima(grid, s.model);

    json mins = json::array();
    std::set<std::string> labels;
    for (const auto& m : minima) {
        labels.insert(std::string(to_string(m.label)));
        mins.push_back({{"i", m.i}, {"j", m.j}, {"x", slice.x_value(m.i)}, {"y", slice.y_value(m.j)},
                        {"energy", m.energy}, {"label", to_string(m.label)}});
    }
    long singular = 0;
    for (bool b : grid.singular) singular += b ? 1 : 0;

    json opts = {{"x", io::encode(slice.x)}, {"y", io::encode(slice.y)}, {"base", io::encode(slice.base)}};
    Run run = start(s, opts);
    run.result = {{"kind", s.kind}, {"nx", grid.nx}, {"ny", grid.ny}, {"singular_cells", singular},
                  {"minima", mins}, {"minimum_labels", labels}};
    std::ostringstream csv;
    write_landscape_csv(csv, grid);
    run.files.emplace_back("landscape.csv", csv.str());
    run.summary.push_back("grid " + std::to_string(grid.nx) + " x " + std::to_string(grid.ny) + ", " +
                          std::to_string(minima.size()) + " local minima");
    for (const auto& m : minima) {
        run.summary.push_back("  " + std::string(to_string(m.label)) + " at (" + fixed(slice.x_value(m.i)) + ", " +
                              fixed(slice.y_value(m.j)) + ") E = " + fixed(m.energy) + " J");
    }
    return run;
}

SnapOptions snap_options(const json& o) {
    SnapOptions so;
    so.min_gap = option_number(o, "min_gap", so.min_gap);
    so.max_gap = option_number(o, "max_gap", so.max_gap);
    so.tolerance = option_number(o, "tolerance", so.tolerance);
    return so;
}

Run run_self_assembly(const io::ScenarioFile& s) {
    require_no_field(s);
    const double k = option_number(s.options, "stiffness", cell_stiffness(s.model));
    const SnapOptions so = snap_options(s.options);
    const auto r = self_assembly_gap(s.model, k, s.params, so);
    json opts = {{"stiffness", k}, {"min_gap", so.min_gap}, {"max_gap", so.max_gap}, {"tolerance", so.tolerance}};
    Run run = start(s, opts);
    run.result = {{"kind", s.kind}, {"stiffness", k}, {"gap", r.gap}, {"relaxations", r.relaxations},
                  {"diagnostic", r.diagnostic}};
    run.summary.push_back("self-assembly gap: " + fixed(r.gap * 1e3) + " mm at k = " + fixed(k) + " N m/rad");
    return run;
}

Run run_calibrate(const io::ScenarioFile& s) {
    require_no_field(s);
    CalibrationOptions co;
    const double target = option_number(s.options, "target_gap", 5e-3);
    co.tolerance = option_number(s.options, "tolerance", co.tolerance);
    const auto r = calibrate_stiffness(s.model, target, s.params, co);
    const ChainModel calibrated = with_cell_stiffness(s.model, r.hinge_stiffness);
    json opts = {{"target_gap", target}, {"tolerance", co.tolerance}};
    Run run = start(s, opts);
    run.result = {{"kind", s.kind},
                  {"target_gap", target},
                  {"hinge_stiffness", r.hinge_stiffness},
                  {"achieved_gap", r.achieved_gap},
                  {"iterations", r.iterations},
                  {"converged", r.converged},
                  {"model", io::encode(calibrated)}};
    run.files.emplace_back("calibrated_model.json", io::encode(calibrated).dump(2) + "\n");
    run.summary.push_back("cell hinge stiffness: " + fixed(r.hinge_stiffness) + " N m/rad");
    run.summary.push_back("self-assembly gap: " + fixed(r.achieved_gap * 1e3) + " mm after " +
                          std::to_string(r.iterations) + " iterations");
    return run;
}

Run execute_scenario(const io::ScenarioFile& s) {
    if (s.kind == "relax") return run_relax(s);
    if (s.kind == "unfold") return run_unfold(s);
    if (s.kind == "squeeze") return run_squeeze(s);
    if (s.kind == "sequence") return run_sequence(s);
    if (s.kind == "landscape") return run_landscape(s);
    if (s.kind == "self_assembly") return run_self_assembly(s);
    if (s.kind == "calibrate") return run_calibrate(s);
    throw ValidationError("scenario.kind: unsupported kind '" + s.kind + "'");
}

// ---- output --------------------------------------------------------------

fs::path output_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("MGOR_OUT_DIR"); env && *env) return env;
    return "runs";
}

std::string utc_stamp(const char* format) {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, format, &tm);
    return buf;
}

fs::path make_run_dir(const fs::path& root, const std::string& kind) {
    fs::create_directories(root);
    const std::string base = kind + "-" + utc_stamp("%Y%m%dT%H%M%SZ");
    for (int n = 0;; ++n) {
        const fs::path dir = root / (n == 0 ? base : base + "-" + std::to_string(n));
        if (fs::create_directory(dir)) return dir;
    }
}

// Written beside the target and renamed, so a reader never sees half a file.
void write_file(const fs::path& path, const std::string& contents) {
    const fs::path tmp = path.string() + ".part";
    {
        std::ofstream f(tmp, std::ios::binary);
        f << contents;
        if (!f) throw std::runtime_error("could not write " + path.string());
    }
    fs::rename(tmp, path);
}

json metadata(const std::vector<std::string>& args) {
    return {{"tool", "mgor"}, {"version", kVersion}, {"created", utc_stamp("%Y-%m-%dT%H:%M:%SZ")}, {"argv", args}};
}

int emit(const Run& run, const fs::path& root, const std::vector<std::string>& args) {
    const fs::path dir = make_run_dir(root, run.kind);
    write_file(dir / "inputs.json", run.inputs.dump(2) + "\n");
    write_file(dir / "metadata.json", metadata(args).dump(2) + "\n");
    if (run.samples) {
        std::ostringstream csv;
        io::write_trajectory_csv(csv, run.model, *run.samples);
        write_file(dir / "trajectory.csv", csv.str());
    }
    for (const auto& [name, contents] : run.files) write_file(dir / name, contents);
    write_file(dir / "result.json", run.result.dump(2) + "\n");
    for (const auto& line : run.summary) std::cout << line << '\n';
    std::cout << "run directory: " << dir.string() << '\n';
    return 0;
}

ChainModel model_argument(const std::string& spec) {
    if (spec == "calibrated" || spec == "uncalibrated") return io::decode_model(spec);
    return io::decode_model(io::read_json_file(spec), spec);
}

// ---- wpt ----------------------------------------------------------------

std::vector<std::pair<double, double>> parse_points(const std::vector<std::string>& raw) {
    if (raw.empty()) return {{0.0, 58.0}, {10.0, 44.2}, {20.0, 25.2}};
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : raw) {
        const auto comma = p.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("no comma");
            std::size_t used = 0;
            const double d = std::stod(p.substr(0, comma), &used);
            const std::string vs = p.substr(comma + 1);
            std::size_t used_v = 0;
            const double v = std::stod(vs, &used_v);
            if (used == 0 || used_v != vs.size()) throw std::invalid_argument("trailing text");
            pts.emplace_back(d, v);
        } catch (const std::logic_error&) {
            throw ValidationError("--point '" + p + "': expected MM,VOLTS");
        }
    }
    return pts;
}

json coupling_json(const wpt::CouplingModel& m) {
    return {{"a", m.a}, {"b", m.b}, {"c", m.c}, {"range_min", m.range_min}, {"range_max", m.range_max}};
}

struct WptArgs {
    bool json_out = false;
    // design
    std::optional<double> target_uh, radius_in, width_in;
    std::optional<int> turns;
    std::string free, sides = "single";
    // resonance
    std::optional<double> l_uh, c_uf, f_khz;
    // faraday
    double flux_wb = 0.0;
    // coupling / budget
    std::vector<std::string> points;
    std::vector<double> at;
    std::optional<double> distance;
    double source_w = 1.2, led_mw = 80.0, full_v = 0.0;
    int leds = 15;
};

void print(const WptArgs& a, const json& doc, const std::vector<std::string>& text) {
    if (a.json_out) {
        std::cout << doc.dump(2) << '\n';
    } else {
        for (const auto& line : text) std::cout << line << '\n';
    }
}

int wpt_design(const WptArgs& a) {
    wpt::SpiralCoil c;
    c.sides = wpt::sides_from_string(a.sides);
    if (a.radius_in) c.mean_radius = *a.radius_in * wpt::kMetersPerInch;
    if (a.width_in) c.winding_width = *a.width_in * wpt::kMetersPerInch;
    if (a.turns) c.turns_per_side = *a.turns;
    std::vector<std::string> text;
    json doc;
    auto coil_json = [](const wpt::SpiralCoil& k) {
        return json{{"mean_radius_in", k.mean_radius / wpt::kMetersPerInch},
                    {"winding_width_in", k.winding_width / wpt::kMetersPerInch},
                    {"turns_per_side", k.turns_per_side},
                    {"sides", wpt::to_string(k.sides)}};
    };
    if (!a.target_uh) {
        if (!a.radius_in || !a.width_in || !a.turns) {
            throw ValidationError("wpt design: give --radius-in, --width-in and --turns, or --target-uh with --free");
        }
        const double l = wpt::wheeler_inductance(c);
        doc = {{"coil", coil_json(c)}, {"inductance_uh", l * 1e6}};
        text.push_back("inductance: " + fixed(l * 1e6) + " uH (" + std::string(wpt::to_string(c.sides)) + ")");
        if (c.sides == wpt::Sides::Single) {
            auto d = c;
            d.sides = wpt::Sides::Double;
            text.push_back("double-sided: " + fixed(wpt::wheeler_inductance(d) * 1e6) + " uH");
            doc["double_sided_uh"] = wpt::wheeler_inductance(d) * 1e6;
        }
    } else {
        wpt::FreeVariable fv;
        if (a.free == "radius") fv = wpt::FreeVariable::MeanRadius;
        else if (a.free == "width") fv = wpt::FreeVariable::WindingWidth;
        else if (a.free == "turns") fv = wpt::FreeVariable::Turns;
        else throw ValidationError("wpt design: --free must be radius, width or turns");
        const auto d = wpt::inverse_design_coil(*a.target_uh * 1e-6, fv, c);
        doc = {{"target_uh", *a.target_uh}, {"free", a.free}, {"coil", coil_json(d.coil)},
               {"exact_turns", d.exact_turns}, {"inductance_uh", d.inductance * 1e6}, {"residual", d.residual}};
        text.push_back("mean radius: " + fixed(d.coil.mean_radius / wpt::kMetersPerInch) + " in");
        text.push_back("winding width: " + fixed(d.coil.winding_width / wpt::kMetersPerInch) + " in");
        text.push_back("turns per side: " + std::to_string(d.coil.turns_per_side) +
                       (fv == wpt::FreeVariable::Turns ? " (exact " + fixed(d.exact_turns, 6) + ")" : ""));
        text.push_back("inductance: " + fixed(d.inductance * 1e6) + " uH, residual " + fixed(d.residual, 3));
    }
    print(a, doc, text);
    return 0;
}

int wpt_resonance(const WptArgs& a) {
    if (!a.l_uh) throw ValidationError("wpt resonance: --l-uh is required");
    if (!a.c_uf && !a.f_khz) throw ValidationError("wpt resonance: give --c-uf, --f-khz or both");
    const double l = *a.l_uh * 1e-6;
    json doc = {{"inductance_uh", *a.l_uh}};
    std::vector<std::string> text;
    if (a.c_uf) {
        const double f = wpt::resonant_frequency(l, *a.c_uf * 1e-6);
        doc["capacitance_uf"] = *a.c_uf;
        doc["resonant_frequency_khz"] = f * 1e-3;
        text.push_back("resonant frequency: " + fixed(f * 1e-3) + " kHz");
    }
    if (a.f_khz) {
        const double c = wpt::required_capacitance(l, *a.f_khz * 1e3);
        doc["drive_frequency_khz"] = *a.f_khz;
        doc["required_capacitance_uf"] = c * 1e6;
        text.push_back("capacitance for " + fixed(*a.f_khz) + " kHz: " + fixed(c * 1e6) + " uF");
    }
    if (a.c_uf && a.f_khz) {
        const double detune = doc["resonant_frequency_khz"].get<double>() / *a.f_khz - 1.0;
        doc["detuning"] = detune;
        text.push_back("detuning of the given capacitor: " + fixed(detune * 100.0, 3) + " %");
    }
    print(a, doc, text);
    return 0;
}

int wpt_faraday(const WptArgs& a) {
    if (!a.turns || !a.f_khz) throw ValidationError("wpt faraday: --turns and --f-khz are required");
    const double v = wpt::faraday_peak_voltage(*a.turns, a.flux_wb, *a.f_khz * 1e3);
    print(a, {{"turns", *a.turns}, {"flux_wb", a.flux_wb}, {"frequency_khz", *a.f_khz}, {"peak_voltage", v}},
          {"peak EMF: " + fixed(v) + " V"});
    return 0;
}

int wpt_coupling(const WptArgs& a) {
    const auto model = wpt::fit_coupling(parse_points(a.points));
    json doc = {{"model", coupling_json(model)}, {"evaluations", json::array()}};
    std::vector<std::string> text = {"V(d) = " + fixed(model.a, 6) + " d^2 + " + fixed(model.b, 6) + " d + " +
                                     fixed(model.c, 6) + "  (d in mm, valid " + fixed(model.range_min) + ".." +
                                     fixed(model.range_max) + " mm)"};
    for (double d : a.at) {
        if (!model.in_range(d)) throw ValidationError("--at " + fixed(d) + ": outside the fitted range");
        doc["evaluations"].push_back({{"distance_mm", d}, {"voltage", model.voltage(d)}});
        text.push_back("V(" + fixed(d) + " mm) = " + fixed(model.voltage(d)) + " V");
    }
    print(a, doc, text);
    return 0;
}

int wpt_budget(const WptArgs& a) {
    if (!a.distance) throw ValidationError("wpt budget: --distance is required");
    const auto model = wpt::fit_coupling(parse_points(a.points));
    wpt::LedLoad load{a.leds, a.led_mw * 1e-3, a.full_v};
    const auto b = wpt::led_budget(model, *a.distance, load, a.source_w);
    json doc = {{"model", coupling_json(model)},
                {"distance_mm", *a.distance},
                {"source_power_w", a.source_w},
                {"load", {{"count", load.count}, {"power_per_led_w", load.power_per_led}, {"full_voltage", load.full_voltage}}},
                {"voltage", b.voltage},
                {"power_w", b.power},
                {"lit", b.lit},
                {"brightness", b.brightness},
                {"above_full_voltage", b.above_full_voltage}};
    std::vector<std::string> text = {"voltage: " + fixed(b.voltage) + " V",
                                     "deliverable power: " + fixed(b.power) + " W",
                                     "LEDs lit: " + std::to_string(b.lit) + " of " + std::to_string(load.count),
                                     "brightness: " + fixed(b.brightness, 3)};
    if (load.full_voltage > 0.0) text.push_back(b.above_full_voltage ? "above full-brightness voltage" : "below full-brightness voltage");
    print(a, doc, text);
    return 0;
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"Quasi-static simulation lab for a magnetically guided origami robot", "mgor"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);
    std::string out;
    app.add_option("--out", out, "Output root for run directories (default $MGOR_OUT_DIR, then ./runs)");

    std::string scenario_file;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario document");
    simulate->add_option("scenario", scenario_file, "Scenario JSON file")->required();

    std::string landscape_file;
    auto* landscape = app.add_subcommand("landscape", "Energy landscape over two hinge groups");
    landscape->add_option("scenario", landscape_file, "Scenario JSON file of kind landscape")->required();

    std::string script = "fig3", model_spec = "calibrated";
    double polarity = 1.0, time_scale = 1.0, sample_interval = 0.1;
    auto* sequence = app.add_subcommand("sequence", "Execute an EPM control script from the flat chain");
    sequence->add_option("--script", script, "fig3 or a script JSON file")->capture_default_str();
    sequence->add_option("--model", model_spec, "calibrated, uncalibrated or a model JSON file")->capture_default_str();
    sequence->add_option("--polarity", polarity, "EPM polarity, 1 or -1")->capture_default_str();
    sequence->add_option("--time-scale", time_scale, "Stretch every primitive duration")->capture_default_str();
    sequence->add_option("--sample-interval", sample_interval, "Trajectory sample spacing, s")->capture_default_str();

    std::vector<double> forces{2.0, 6.0, 10.0};
    std::vector<std::string> axes{"x", "z"};
    auto* squeeze = app.add_subcommand("squeeze", "Load the locked Gamma between plates and release");
    squeeze->add_option("--force", forces, "Plate force, N (repeatable)")->capture_default_str();
    squeeze->add_option("--axis", axes, "Plate normal x, y or z (repeatable)")->capture_default_str();
    squeeze->add_option("--model", model_spec, "calibrated, uncalibrated or a model JSON file")->capture_default_str();

    double target_mm = 5.0;
    std::string calib_from = "uncalibrated";
    auto* calibrate = app.add_subcommand("calibrate", "Fit cell hinge stiffness to a self-assembly gap");
    calibrate->add_option("--target-gap", target_mm, "Target gap, mm")->capture_default_str();
    calibrate->add_option("--model", calib_from, "Starting model")->capture_default_str();

    WptArgs w;
    auto* wpt_cmd = app.add_subcommand("wpt", "Wireless power calculations");
    wpt_cmd->require_subcommand(1);
    auto add_json = [&](CLI::App* c) { c->add_flag("--json", w.json_out, "Print a JSON document"); };
    auto* design = wpt_cmd->add_subcommand("design", "Wheeler spiral inductance, forward or inverse");
    design->add_option("--target-uh", w.target_uh, "Target inductance, uH");
    design->add_option("--free", w.free, "Variable to solve for: radius, width or turns");
    design->add_option("--radius-in", w.radius_in, "Mean radius, in");
    design->add_option("--width-in", w.width_in, "Winding width, in");
    design->add_option("--turns", w.turns, "Turns per side");
    design->add_option("--sides", w.sides, "single or double")->capture_default_str();
    add_json(design);
    auto* resonance = wpt_cmd->add_subcommand("resonance", "LC resonance and capacitor sizing");
    resonance->add_option("--l-uh", w.l_uh, "Inductance, uH");
    resonance->add_option("--c-uf", w.c_uf, "Capacitance, uF");
    resonance->add_option("--f-khz", w.f_khz, "Drive frequency, kHz");
    add_json(resonance);
    auto* faraday = wpt_cmd->add_subcommand("faraday", "Peak EMF of a sinusoidal flux");
    faraday->add_option("--turns", w.turns, "Turns");
    faraday->add_option("--flux-wb", w.flux_wb, "Flux amplitude, Wb");
    faraday->add_option("--f-khz", w.f_khz, "Frequency, kHz");
    add_json(faraday);
    auto* coupling = wpt_cmd->add_subcommand("coupling", "Fit V(d) to measured points");
    coupling->add_option("--point", w.points, "MM,VOLTS (repeatable; default the three reference points)");
    coupling->add_option("--at", w.at, "Evaluate at this distance, mm (repeatable)");
    add_json(coupling);
    auto* budget = wpt_cmd->add_subcommand("budget", "LED illumination at a distance");
    budget->add_option("--distance", w.distance, "Distance, mm");
    budget->add_option("--point", w.points, "MM,VOLTS (repeatable; default the three reference points)");
    budget->add_option("--source-w", w.source_w, "Source power at contact, W")->capture_default_str();
    budget->add_option("--leds", w.leds, "LED count")->capture_default_str();
    budget->add_option("--led-mw", w.led_mw, "Power per LED, mW")->capture_default_str();
    budget->add_option("--full-v", w.full_v, "Full-brightness voltage, V (0 = off)")->capture_default_str();
    add_json(budget);

    std::string dump_what;
    auto* dump = app.add_subcommand("dump", "Print a built-in document as JSON");
    dump->add_option("what", dump_what, "calibrated-model, uncalibrated-model or fig3-script")->required();

    teleop::ServerOptions so;
    std::string recordings;
    auto* serve = app.add_subcommand("serve", "Run the teleoperation WebSocket service");
    serve->add_option("--port", so.port, "TCP port (0 picks one)")->capture_default_str();
    serve->add_option("--address", so.address, "Bind address")->capture_default_str();
    serve->add_option("--cadence", so.cadence, "Snapshots per second")->capture_default_str();
    serve->add_option("--speedup", so.speedup, "Simulated seconds per wall second")->capture_default_str();
    serve->add_option("--scenario", so.scenario, "Starting scenario: beta, gamma or folded")->capture_default_str();
    serve->add_option("--recordings", recordings, "Directory for finished recordings (default OUT/recordings)");
    serve->add_option("--static", so.static_dir, "Serve files from this directory over HTTP");
    serve->add_flag("--paused", so.start_paused, "Start each session paused until a resume command");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    const std::vector<std::string> args(argv + 1, argv + argc);
    const fs::path root = output_root(out);
    try {
        if (simulate->parsed()) {
            return emit(execute_scenario(io::load_scenario(scenario_file)), root, args);
        }
        if (landscape->parsed()) {
            const auto s = io::load_scenario(landscape_file);
            if (s.kind != "landscape") throw ValidationError(landscape_file + ": kind must be landscape, got " + s.kind);
            return emit(execute_scenario(s), root, args);
        }
        if (sequence->parsed()) {
            const ControlScript sc = script == "fig3" ? fig3_script() : io::decode_script(io::read_json_file(script), script);
            EpmRig rig;
            rig.polarity = polarity;
            const json doc = {{"kind", "sequence"},
                              {"model", io::encode(model_argument(model_spec))},
                              {"initial", "flat"},
                              {"options", {{"script", io::encode(sc)}, {"rig", io::encode(rig)},
                                           {"time_scale", time_scale}, {"sample_interval", sample_interval}}}};
            return emit(execute_scenario(io::parse_scenario(doc)), root, args);
        }
        if (squeeze->parsed()) {
            const json doc = {{"kind", "squeeze"},
                              {"model", io::encode(model_argument(model_spec))},
                              {"initial", "locked_gamma"},
                              {"options", {{"force", forces}, {"axis", axes}}}};
            return emit(execute_scenario(io::parse_scenario(doc)), root, args);
        }
        if (calibrate->parsed()) {
            const json doc = {{"kind", "calibrate"},
                              {"model", io::encode(model_argument(calib_from))},
                              {"options", {{"target_gap", target_mm * 1e-3}}}};
            return emit(execute_scenario(io::parse_scenario(doc)), root, args);
        }
        if (wpt_cmd->parsed()) {
            if (design->parsed()) return wpt_design(w);
            if (resonance->parsed()) return wpt_resonance(w);
            if (faraday->parsed()) return wpt_faraday(w);
            if (coupling->parsed()) return wpt_coupling(w);
            if (budget->parsed()) return wpt_budget(w);
        }
        if (dump->parsed()) {
            json doc;
            if (dump_what == "calibrated-model") doc = io::encode(calibrated_model());
            else if (dump_what == "uncalibrated-model") doc = io::encode(model_argument("uncalibrated"));
            else if (dump_what == "fig3-script") doc = io::encode(fig3_script());
            else throw ValidationError("dump: unknown document '" + dump_what + "'");
            std::cout << doc.dump(2) << '\n';
            return 0;
        }
        if (serve->parsed()) {
            so.recordings_dir = recordings.empty() ? (root / "recordings").string() : recordings;
            teleop::Server server(so);
            std::cout << "teleop service on ws://" << so.address << ':' << server.port() << "/ (protocol "
                      << teleop::kProtocolVersion << "), recordings in " << so.recordings_dir << std::endl;
            server.run(true);
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const wpt::ModelRejected& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return 3;
    } catch (const SingularityError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return 3;
    } catch (const ScenarioError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::cerr << app.help();
    return 2;
}

} // namespace mgor::cli
