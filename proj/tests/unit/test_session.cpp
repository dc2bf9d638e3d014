#include <doctest.h>

#include "error.hpp"
#include "session.hpp"

using namespace mpl;
using nlohmann::json;

namespace {

const Scenario &site() {
    static const Scenario s = load_scenario(std::string(MPL_DATA_DIR) + "/earthquake_site.json");
    return s;
}

Checkpoint checkpoint(const std::string &algo = "maml") {
    return Checkpoint{init_params(kDefaultLayerDims, 5), algo, 5, ""};
}

json instruction(int inner, int height, int speed, int safety) {
    return {{"type", "instruction"}, {"ins", {{"inner", inner}, {"height", height}, {"speed", speed}, {"safety", safety}}}};
}

bool is_pref(const json &j) {
    if (!j.is_object() || j.size() != 4) return false;
    for (auto name : kBehaviorNames) {
        auto it = j.find(std::string(name));
        if (it == j.end() || !it->is_number()) return false;
    }
    return true;
}

bool is_vec3(const json &j) { return j.is_array() && j.size() == 3 && j[0].is_number() && j[1].is_number() && j[2].is_number(); }

void check_envelope(const json &m, const std::string &type, const std::string &id) {
    CHECK(m.at("type") == type);
    CHECK(m.at("schema_version") == "1");
    CHECK(m.at("session_id") == id);
}

void check_frame_schema(const json &f, const std::string &id) {
    check_envelope(f, "frame", id);
    CHECK(f.at("step").is_number_integer());
    CHECK(f.at("robots").is_array());
    for (const auto &r : f.at("robots")) {
        CHECK(is_vec3(r.at("p")));
        CHECK(is_vec3(r.at("v")));
    }
    CHECK(is_pref(f.at("H_hat")));
    CHECK(is_pref(f.at("R")));
    const auto sit = f.at("situation").get<std::string>();
    CHECK((sit == "FF" || sit == "TF" || sit == "FT" || sit == "TT"));
    CHECK(f.at("phase_active").is_boolean());
    CHECK(f.at("metrics").at("n_phases").is_number_integer());
    CHECK(f.at("metrics").at("current_phase_len").is_number_integer());
}

}  // namespace

TEST_CASE("opening messages") {
    Session s("s1", checkpoint("reptile"), site(), 3);
    auto msgs = s.opening_messages();
    REQUIRE(msgs.size() == 3);
    check_envelope(msgs[0], "hello", "s1");
    CHECK(msgs[0]["algo"] == "reptile");
    CHECK(msgs[0]["robot_count"] == site().robot_count);
    check_envelope(msgs[1], "arena", "s1");
    CHECK(msgs[1]["obstacles"].size() == site().arena.obstacles.size());
    CHECK(msgs[1]["targets"].size() == site().arena.targets.size());
    check_frame_schema(msgs[2], "s1");
    CHECK(msgs[2]["step"] == 0);
    CHECK(msgs[2]["algo"] == "reptile");
    CHECK(msgs[2]["robots"].size() == static_cast<std::size_t>(site().robot_count));
    CHECK(msgs[2].contains("arena"));
    CHECK(msgs[2]["arena"]["obstacles"].size() == site().arena.obstacles.size());
}

TEST_CASE("frames carry the live prediction") {
    Session s("s1", checkpoint(), site(), 3);
    for (int k = 0; k < 20; ++k) {
        s.tick();
        auto f = s.frame();
        check_frame_schema(f, "s1");
        CHECK(f["step"] == k + 1);
        CHECK_FALSE(f.contains("arena"));
        const auto h = forward(s.params(), s.features());
        for (std::size_t b = 0; b < kBehaviorCount; ++b) CHECK(f["H_hat"][std::string(kBehaviorNames[b])] == h[b]);
        if (k % 5 == 0) s.handle(instruction(0, 1, 0, 0));
    }
}

TEST_CASE("zero instruction leaves the model alone") {
    Session s("a", checkpoint(), site(), 1);
    const auto before = s.params();
    const auto h = s.h_hat();
    auto replies = s.handle(instruction(0, 0, 0, 0));
    REQUIRE(replies.size() == 1);
    check_envelope(replies[0], "ack", "a");
    CHECK(replies[0]["updated"] == false);
    CHECK(replies[0]["H_hat"]["speed"] == h[2]);
    CHECK(s.params() == before);
}

TEST_CASE("speed up raises the predicted speed each time") {
    Session s("a", checkpoint(), site(), 1);
    double last = s.h_hat()[2];
    for (int k = 0; k < 3; ++k) {
        auto replies = s.handle(instruction(0, 0, 1, 0));
        REQUIRE(replies.size() == 1);
        CHECK(replies[0]["updated"] == true);
        const double speed = replies[0]["H_hat"]["speed"];
        CHECK(speed > last);
        last = speed;
        s.tick();
        CHECK(s.frame()["H_hat"]["speed"].get<double>() == doctest::Approx(s.h_hat()[2]));
    }
}

TEST_CASE("ack matches the headless update rule") {
    Session s("a", checkpoint(), site(), 2);
    OnlineAdapter ref(checkpoint().params, RuntimeConfig{});
    const auto f = s.features();
    Instruction ins{{0, -1, 0, 1}};
    ref.apply(f, ref.predict(f), ins);
    s.handle(instruction(0, -1, 0, 1));
    CHECK(s.params() == ref.params());
}

TEST_CASE("instruction validation") {
    Session s("a", checkpoint(), site(), 1);
    const auto before = s.params();
    for (const json &bad : {instruction(0, 0, 2, 0),
                            json{{"type", "instruction"}, {"ins", {{"inner", 0}, {"height", 0}, {"speed", 1}}}},
                            json{{"type", "instruction"}, {"ins", {{"inner", 0}, {"height", 0}, {"speed", "up"}, {"safety", 0}}}},
                            json{{"type", "instruction"}, {"ins", {{"inner", 0.5}, {"height", 0}, {"speed", 0}, {"safety", 0}}}},
                            json{{"type", "instruction"}}}) {
        auto replies = s.handle(bad);
        REQUIRE(replies.size() == 1);
        check_envelope(replies[0], "error", "a");
        CHECK(replies[0]["message"] == "invalid instruction");
    }
    CHECK(s.params() == before);
    // Doubles on the wire are fine.
    CHECK(instruction_from_json(json{{"inner", -1.0}, {"height", 0.0}, {"speed", 1.0}, {"safety", 0}}) ==
          Instruction{{-1, 0, 1, 0}});
}

TEST_CASE("malformed and unknown messages") {
    Session s("a", checkpoint(), site(), 1);
    auto r = s.handle_text("{not json");
    REQUIRE(r.size() == 1);
    CHECK(r[0]["type"] == "error");
    CHECK(r[0]["message"] == "malformed message");
    CHECK(s.handle(json::array())[0]["message"] == "malformed message");
    CHECK(s.handle(json{{"type", 3}})[0]["message"] == "malformed message");
    auto u = s.handle(json{{"type", "explode"}});
    CHECK(u[0]["type"] == "error");
    CHECK(u[0]["message"].get<std::string>().find("explode") != std::string::npos);
    // Session still works afterwards.
    CHECK(s.tick());
}

TEST_CASE("pause freezes stepping and resume continues") {
    Session s("a", checkpoint(), site(), 1);
    s.tick();
    s.tick();
    auto r = s.handle(json{{"type", "pause"}});
    CHECK(r[0]["type"] == "ack");
    CHECK(r[0]["command"] == "pause");
    CHECK(s.paused());
    const auto robots = s.world().robots();
    for (int k = 0; k < 10; ++k) CHECK_FALSE(s.tick());
    CHECK(s.step() == 2);
    CHECK(s.world().robots().front().position == robots.front().position);
    CHECK(s.frame()["paused"] == true);
    s.handle(json{{"type", "resume"}});
    CHECK(s.tick());
    CHECK(s.step() == 3);
}

TEST_CASE("reset reloads the checkpoint and world") {
    Session s("keep", checkpoint(), site(), 4);
    const auto start = s.frame();
    for (int k = 0; k < 15; ++k) {
        s.tick();
        s.handle(instruction(1, 0, -1, 0));
    }
    CHECK_FALSE(s.params() == checkpoint().params);
    auto r = s.handle(json{{"type", "reset"}});
    REQUIRE(r.size() == 3);
    check_envelope(r[0], "ack", "keep");
    CHECK(r[0]["command"] == "reset");
    CHECK(r[1]["type"] == "arena");
    CHECK(r[2]["step"] == 0);
    CHECK(s.params() == checkpoint().params);
    CHECK(s.id() == "keep");
    CHECK(r[2]["robots"] == start["robots"]);
    CHECK(s.phases().empty());
}

TEST_CASE("phase metrics use the shared detector") {
    Session s("a", checkpoint(), site(), 1);
    CHECK_FALSE(s.phase_active());
    for (int k = 0; k < 4; ++k) {
        s.handle(instruction(0, 0, 1, 0));
        s.tick();
    }
    CHECK(s.phase_active());
    CHECK(s.phases().size() == 1);
    CHECK(s.current_phase_length() == 5);
    auto f = s.frame();
    CHECK(f["phase_active"] == true);
    CHECK(f["metrics"]["n_phases"] == 1);
    for (int k = 0; k < 4; ++k) s.tick();
    CHECK_FALSE(s.phase_active());
    CHECK(s.current_phase_length() == 0);
    s.handle(instruction(0, 0, 1, 0));
    CHECK(s.phases().size() == 2);
}

TEST_CASE("sessions are isolated") {
    Session a("s1", checkpoint(), site(), 1);
    Session b("s2", checkpoint(), site(), 1);
    CHECK(a.id() != b.id());
    a.handle(instruction(1, 1, 1, 1));
    for (int k = 0; k < 5; ++k) a.tick();
    CHECK(b.params() == checkpoint().params);
    CHECK(b.step() == 0);
    CHECK(a.frame()["session_id"] == "s1");
    CHECK(b.frame()["session_id"] == "s2");
}

TEST_CASE("operator button messages") {
    Session s("a", checkpoint(), site(), 1);
    // "speed -" and "satisfied" as a client would send them.
    auto down = s.handle_text(R"({"type":"instruction","ins":{"inner":0,"height":0,"speed":-1,"safety":0}})");
    CHECK(down[0]["updated"] == true);
    auto ok = s.handle_text(R"({"type":"instruction","ins":{"inner":0,"height":0,"speed":0,"safety":0}})");
    CHECK(ok[0]["updated"] == false);
}

TEST_CASE("shutdown message") {
    Session s("z", checkpoint(), site(), 1);
    check_envelope(s.shutdown_message(), "server_shutdown", "z");
}

TEST_CASE("invalid checkpoint is rejected") {
    auto c = checkpoint();
    c.params.theta.pop_back();
    CHECK_THROWS_AS(Session("x", c, site(), 1), Error);
}
