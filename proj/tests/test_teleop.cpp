#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mgor/errors.hpp"
#include "mgor/io.hpp"
#include "mgor/teleop.hpp"
#include "teleop_fixture.hpp"

using namespace mgor;
using namespace mgor::teleop;
using nlohmann::json;

namespace {

const SessionOptions& options() {
    static const SessionOptions o = default_session_options();
    return o;
}

void require_same(const Config& a, const Config& b, double tol = 0.0) {
    REQUIRE(a.hinge_angles.size() == b.hinge_angles.size());
    for (std::size_t i = 0; i < a.hinge_angles.size(); ++i) REQUIRE(std::abs(a.hinge_angles[i] - b.hinge_angles[i]) <= tol);
    REQUIRE((a.base.position - b.base.position).norm() <= tol);
    REQUIRE((a.base.rotation - b.base.rotation).norm() <= tol);
}

} // namespace

TEST_CASE("commands over the caps are rejected and change nothing") {
    Session s(options());
    s.advance(10);
    const Snapshot before = s.snapshot();
    const auto log_size = s.log().size();
    CHECK_THROWS_AS(s.submit(Command::velocity(Vec3(0.06, 0, 0), Vec3::Zero())), ValidationError);
    CHECK_THROWS_AS(s.submit(Command::velocity(Vec3::Zero(), Vec3(0, 0, 3.5))), ValidationError);
    CHECK_THROWS_AS(s.submit(Command::velocity(Vec3(NAN, 0, 0), Vec3::Zero())), ValidationError);
    CHECK_THROWS_AS(s.submit(Command::reset("sideways")), ValidationError);
    CHECK_THROWS_AS(s.submit(Command::stop_recording("x")), ValidationError);
    CHECK_THROWS_AS(s.submit(Command::of(CommandType::Pause), 3L), ValidationError);
    CHECK(s.log().size() == log_size);
    const Snapshot after = s.snapshot();
    require_same(before.q, after.q);
    CHECK(after.step == before.step);
    CHECK(encode(after) == encode(before));

    // at the cap is fine
    CHECK_NOTHROW(s.submit(Command::velocity(Vec3(0.05, 0, 0), Vec3::Zero())));
}

TEST_CASE("a session without commands is plain stepping in a static field") {
    Session s(options());
    s.advance(300);
    Config q = Config::flat(options().model);
    Environment env;
    env.epm = options().rig.dipoles(fig3_script().initial_pose);
    for (long k = 0; k < 300; ++k) q = step(options().model, q, env, options().params, k);
    require_same(s.snapshot().q, q);
    CHECK(s.snapshot().t == doctest::Approx(0.3));
}

TEST_CASE("pause freezes simulated time") {
    Session s(options());
    s.advance(50);
    s.submit(Command::of(CommandType::Pause));
    s.advance(1);
    const Snapshot frozen = s.snapshot();
    CHECK(frozen.paused);
    for (int i = 0; i < 5; ++i) s.advance(100);
    CHECK(s.snapshot().step == frozen.step);
    CHECK(s.snapshot().t == frozen.t);
    require_same(s.snapshot().q, frozen.q);
    s.submit(Command::of(CommandType::Resume));
    s.advance(10);
    CHECK(s.snapshot().step == frozen.step + 10);
}

TEST_CASE("time only moves forward") {
    Session s(options());
    double t = s.snapshot().t;
    for (int i = 0; i < 20; ++i) {
        if (i == 7) s.submit(Command::velocity(Vec3(0, 0.01, 0), Vec3::Zero()));
        if (i == 12) s.submit(Command::reset("gamma"));
        s.advance(i % 3);
        const double now = s.snapshot().t;
        REQUIRE(now >= t);
        t = now;
    }
}

TEST_CASE("recording a constant velocity gives one primitive") {
    Session s(options());
    s.submit(Command::of(CommandType::StartRecording));
    s.submit(Command::velocity(Vec3(0, -0.01, 0), Vec3::Zero()));
    s.advance(2000);
    s.submit(Command::stop_recording("drift"));
    CHECK(s.advance(0).empty());
    REQUIRE(s.last_recording());
    const ControlScript& r = *s.last_recording();
    CHECK(r.name == "drift");
    REQUIRE(r.primitives.size() == 1);
    CHECK(r.primitives[0].kind == PrimitiveKind::Translate);
    CHECK(r.primitives[0].duration == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.primitives[0].speed == doctest::Approx(0.01));
    CHECK(r.primitives[0].axis.y() == doctest::Approx(-1.0));
    CHECK((r.initial_pose.position - fig3_script().initial_pose.position).norm() < 1e-15);

    s.submit(Command::of(CommandType::StartRecording));
    s.submit(Command::velocity(Vec3::Zero(), Vec3(0.5, 0, 0)));
    s.advance(500);
    s.submit(Command::velocity(Vec3::Zero(), Vec3::Zero()));
    s.advance(250);
    s.submit(Command::stop_recording("turn"));
    s.advance(0);
    REQUIRE(s.last_recording()->primitives.size() == 2);
    CHECK(s.last_recording()->primitives[0].kind == PrimitiveKind::Rotate);
    CHECK(s.last_recording()->primitives[0].rate == doctest::Approx(0.5));
    CHECK(s.last_recording()->primitives[1].kind == PrimitiveKind::Hold);
    CHECK(s.recordings_finished() == 2);
}

TEST_CASE("an empty recording is an error") {
    Session s(options());
    s.submit(Command::of(CommandType::StartRecording));
    s.submit(Command::stop_recording("nothing"));
    const auto errors = s.advance(5);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].find("empty recording") != std::string::npos);
    CHECK_FALSE(s.last_recording());
    CHECK(s.recordings_finished() == 0);
}

TEST_CASE("replaying the log reproduces the session") {
    Session s(options());
    s.submit(Command::velocity(Vec3(0, -0.02, 0), Vec3(0.3, 0, 0)));
    s.advance(400);
    s.submit(Command::of(CommandType::Pause));
    s.advance(50);
    s.submit(Command::of(CommandType::Resume));
    s.submit(Command::set_pose(RigidTransform::translation(Vec3(0, 0.05, 0.05))));
    s.advance(300);
    s.submit(Command::velocity(Vec3::Zero(), Vec3::Zero()), 900L);
    s.advance(300);
    const Session r = replay(options(), "beta", s.log(), s.step_index());
    require_same(r.snapshot().q, s.snapshot().q);
    CHECK(encode(r.snapshot()) == encode(s.snapshot()));

    // the log survives its wire form
    const auto log2 = decode_log(json::parse(encode_log(s.log()).dump()));
    CHECK(encode_log(log2) == encode_log(s.log()));
}

TEST_CASE("command wire format") {
    for (const Command& c : {Command::velocity(Vec3(0.01, 0, 0), Vec3(0, 0, 1)),
                             Command::set_pose(RigidTransform::translation(Vec3(0, 0.07, 0.04))),
                             Command::of(CommandType::Pause), Command::of(CommandType::Resume),
                             Command::reset("gamma"), Command::of(CommandType::StartRecording),
                             Command::stop_recording("a")}) {
        const json j = encode(c);
        CHECK(encode(decode_command(j)) == j);
    }
    CHECK_THROWS_AS(decode_command(json{{"type", "jump"}}), ValidationError);
    CHECK_THROWS_AS(decode_command(json{{"type", "pause"}, {"when", 1}}), ValidationError);
    CHECK_THROWS_AS(decode_command(json{{"type", "pause"}, {"payload", {{"x", 1}}}}), ValidationError);
    CHECK_THROWS_AS(decode_command(json{{"type", "set_epm_velocity"}, {"payload", {{"linear", {1, 2}}}}}),
                    ValidationError);
    CHECK_NOTHROW(decode_command(json{{"type", "pause"}, {"client_seq", 4}}));
}

TEST_CASE("folded scenario unfolds without input") {
    Session s(options(), "folded");
    CHECK(s.snapshot().label == StateLabel::Alpha);
    s.advance(60000);
    CHECK(s.snapshot().label == StateLabel::Beta);
}

TEST_CASE("driving the built-in sequence live reaches Gamma and records it") {
    Session s(options());
    for (const auto& e : testing::fig3_command_log(options().params)) s.submit(e.command, e.step);
    const long steps = testing::fig3_steps(options().params);
    CHECK(s.advance(steps).empty());
    CHECK(s.snapshot().label == StateLabel::Gamma);
    REQUIRE(s.last_recording());
    const ControlScript& rec = *s.last_recording();
    CHECK(rec.primitives.size() == fig3_script().primitives.size());
    CHECK(rec.total_duration() == doctest::Approx(fig3_script().total_duration()).epsilon(1e-9));

    const auto replayed = execute(rec, options().model, Config::flat(options().model), options().params);
    CHECK(replayed.report.final_label == StateLabel::Gamma);
    require_same(replayed.samples.back().q, s.snapshot().q, 1e-6);
}
