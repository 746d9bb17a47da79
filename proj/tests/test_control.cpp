#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mgor/control.hpp"
#include "mgor/errors.hpp"
#include "mgor/scenarios.hpp"
#include "support.hpp"

using namespace mgor;

namespace {

double pose_distance(const RigidTransform& a, const RigidTransform& b) {
    return (a.position - b.position).norm() + (a.rotation - b.rotation).norm();
}

bool is_axis(const Vec3& v, const Vec3& axis) { return std::abs(std::abs(v.dot(axis)) - 1.0) < 1e-12; }

const ExecutionResult& fig3_run() {
    static const ExecutionResult r = [] {
        const ChainModel m = calibrated_model();
        return execute(fig3_script(), m, Config::flat(m), SimParams{});
    }();
    return r;
}

} // namespace

TEST_CASE("built-in script content") {
    const ControlScript s = fig3_script();
    CHECK(s.primitives.size() >= 7);
    bool rot_x = false, trans_y = false, rot_normal = false;
    for (const auto& p : s.primitives) {
        if (p.kind == PrimitiveKind::Rotate && is_axis(p.rotation_axis, Vec3::UnitX())) rot_x = true;
        if (p.kind == PrimitiveKind::Translate && is_axis(p.axis, Vec3::UnitY())) trans_y = true;
        if (p.kind == PrimitiveKind::Rotate && is_axis(p.rotation_axis, Vec3::UnitZ())) rot_normal = true;
    }
    CHECK(rot_x);
    CHECK(trans_y);
    CHECK(rot_normal);
    CHECK(s.primitives.front().kind == PrimitiveKind::Hold);
}

TEST_CASE("pose closed forms") {
    ControlScript s;
    s.initial_pose = {Vec3(0.01, 0.02, 0.03), exp_so3(Vec3(0.1, 0.2, 0.3))};
    s.primitives = {ControlPrimitive::translate(Vec3(0, 0.6, 0.8), 0.01, 4.0)};
    CHECK(pose_distance(epm_pose_at(s, 0.0), s.initial_pose) == 0.0);
    const auto p = epm_pose_at(s, 2.5);
    CHECK((p.position - (s.initial_pose.position + 0.025 * Vec3(0, 0.6, 0.8))).norm() < 1e-15);
    CHECK((p.rotation - s.initial_pose.rotation).norm() < 1e-15);

    s.primitives = {ControlPrimitive::rotate(Vec3::UnitX(), 0.5, 2.0)};
    const auto r = epm_pose_at(s, 1.5);
    CHECK((r.position - s.initial_pose.position).norm() < 1e-15);
    const Mat3 expect = exp_so3(Vec3::UnitX() * 0.75) * s.initial_pose.rotation;
    CHECK((r.rotation - expect).norm() < 1e-12);

    CHECK_THROWS_AS(epm_pose_at(s, -0.1), ValidationError);
    CHECK_THROWS_AS(epm_pose_at(s, 2.1), ValidationError);
}

TEST_CASE("pose is continuous across primitive boundaries") {
    const ControlScript s = fig3_script();
    double t = 0.0;
    for (std::size_t k = 0; k + 1 < s.primitives.size(); ++k) {
        const RigidTransform start = epm_pose_at(s, t);
        t += s.primitives[k].duration;
        const auto& p = s.primitives[k];
        const RigidTransform end_of_left = advance_pose(start, p.linear_velocity(), p.angular_velocity(), p.duration);
        CHECK(pose_distance(end_of_left, epm_pose_at(s, t)) <= 1e-12);
        const double eps = 1e-9;
        CHECK(pose_distance(epm_pose_at(s, t - eps), epm_pose_at(s, t + eps)) <= 1e-7);
    }
}

TEST_CASE("time scaling keeps the path") {
    const ControlScript s = fig3_script();
    const ControlScript slow = time_scaled(s, 2.0);
    CHECK(slow.total_duration() == doctest::Approx(2.0 * s.total_duration()));
    for (double t = 0.0; t < s.total_duration(); t += 7.3) {
        CHECK(pose_distance(epm_pose_at(slow, 2.0 * t), epm_pose_at(s, t)) <= 1e-10);
    }
}

TEST_CASE("primitive and script validation") {
    CHECK_THROWS_AS(ControlPrimitive::hold(0.0).validate(), ValidationError);
    CHECK_THROWS_AS(ControlPrimitive::translate(Vec3(1, 1, 0), 0.01, 1.0).validate(), ValidationError);
    CHECK_THROWS_AS(ControlPrimitive::rotate(Vec3::UnitX(), std::nan(""), 1.0).validate(), ValidationError);
    ControlScript empty;
    CHECK_THROWS_AS(empty.validate(), ValidationError);
    for (auto k : {PrimitiveKind::Hold, PrimitiveKind::Translate, PrimitiveKind::Rotate, PrimitiveKind::TranslateRotate}) {
        CHECK(primitive_kind_from_string(to_string(k)) == k);
    }
}

TEST_CASE("a hold from the flat chain stays Beta") {
    const ChainModel m = calibrated_model();
    ControlScript s;
    s.initial_pose = fig3_script().initial_pose;
    s.primitives = {ControlPrimitive::hold(5.0)};
    const auto r = execute(s, m, Config::flat(m), SimParams{});
    CHECK(r.report.final_label == StateLabel::Beta);
    CHECK(r.report.flip_events == 0);
    CHECK(static_cast<long>(r.report.timeline.size()) == step_count(s, SimParams{}));
}

TEST_CASE("built-in script ends Gamma with a flip") {
    const auto& r = fig3_run();
    CHECK(r.report.final_label == StateLabel::Gamma);
    CHECK(r.report.flip_events >= 1);
    CHECK(static_cast<long>(r.report.timeline.size()) == step_count(fig3_script(), SimParams{}));
    CHECK(r.report.first_seen.count(StateLabel::Beta) == 1);
    CHECK(r.report.first_seen.count(StateLabel::Gamma) == 1);
    CHECK(r.samples.front().label == StateLabel::Beta);
}

TEST_CASE("re-running the built-in script is identical") {
    const ChainModel m = calibrated_model();
    const auto again = execute(fig3_script(), m, Config::flat(m), SimParams{});
    const auto& first = fig3_run();
    REQUIRE(again.samples.size() == first.samples.size());
    for (std::size_t i = 0; i < first.samples.size(); ++i) {
        CHECK(again.samples[i].t == first.samples[i].t);
        CHECK(again.samples[i].q.hinge_angles == first.samples[i].q.hinge_angles);
        CHECK(again.samples[i].q.base.position == first.samples[i].q.base.position);
        CHECK(again.samples[i].energy.total() == first.samples[i].energy.total());
    }
    CHECK(again.report.timeline == first.report.timeline);
}

TEST_CASE("twice as slow, same outcome") {
    const ChainModel m = calibrated_model();
    const auto r = execute(time_scaled(fig3_script(), 2.0), m, Config::flat(m), SimParams{});
    CHECK(r.report.final_label == StateLabel::Gamma);
}

TEST_CASE("reversed EPM polarity does not reach Gamma") {
    const ChainModel m = calibrated_model();
    ExecuteOptions o;
    o.rig.polarity = -1.0;
    const auto r = execute(fig3_script(), m, Config::flat(m), SimParams{}, o);
    CHECK(r.report.final_label != StateLabel::Gamma);
    CHECK(r.report.final_label == StateLabel::Beta);  // pinned
}
