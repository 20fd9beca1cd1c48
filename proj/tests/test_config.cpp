#include "doctest.h"

#include <string>

#include "fal/config.hpp"

using namespace fal;

namespace {

std::size_t error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_CASE("empty document gets library defaults") {
    const RunConfig rc = parse_config("{}");
    CHECK(rc.preset.empty());
    CHECK(rc.fal.width == FalConfig{}.width);
    CHECK(rc.data.kind == DataKind::Sphere);
}

TEST_CASE("theory preset") {
    const RunConfig rc = parse_config(R"({"preset": "theory"})");
    CHECK(rc.fal.theory);
    CHECK(rc.fal.eta_local == doctest::Approx(1.0 / static_cast<double>(rc.fal.local_steps)));
    CHECK(rc.fal.eta_global ==
          doctest::Approx(0.5 / static_cast<double>(rc.data.clients * rc.data.per_client)));
    CHECK(rc.fal.adversary.step_size == doctest::Approx(rc.fal.adversary.rho / 4.0));

    const RunConfig k4 = parse_config(R"({"preset": "theory", "local_steps": 4})");
    CHECK(k4.fal.eta_local == 0.25);
    const RunConfig pinned = parse_config(R"({"preset": "theory", "local_steps": 4, "eta_local": 0.1})");
    CHECK(pinned.fal.eta_local == 0.1);
}

TEST_CASE("experiment6 preset") {
    const RunConfig rc = parse_config(R"({"preset": "experiment6", "data": {"scale": 0.85}})");
    CHECK(rc.data.kind == DataKind::Clusters);
    CHECK(rc.data.clusters.scale == 0.85);
    CHECK(rc.fal.rounds == 100);
    CHECK(rc.fal.adversary.mode == AdversaryMode::LinfBox);
    CHECK_FALSE(rc.fal.theory);
    const LoadedData data = build_data(rc.data, rc.fal.adversary.rho);
    CHECK(data.train.total_points() == 800);
    CHECK(data.train.num_clients() == 4);
    CHECK(data.test.size() == 200);
}

TEST_CASE("unknown keys and bad values report their line") {
    CHECK(error_line("{\n  \"width\": 64,\n  \"widht\": 3\n}") == 3);
    CHECK(error_line("{\n  \"adversary\": {\n    \"rho\": 0.1,\n    \"radius\": 2\n  }\n}") == 4);
    CHECK(error_line("{\n  \"rounds\": -1\n}") == 2);
    CHECK(error_line("{\n  \"preset\": \"nope\"\n}") == 2);
    CHECK(error_line("{\n  \"width\": 64,\n  oops\n}") == 3);
    try {
        parse_config("{\n\"bogus\": 1}");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("bogus") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"kind": "csv"}})"), ConfigError);
}

TEST_CASE("overrides") {
    nlohmann::json doc = nlohmann::json::object();
    apply_overrides(doc, {"width=32", "adversary.rho=0.1", "adversary.mode=linf-box", "theory=false"});
    CHECK(doc["width"] == 32);
    CHECK(doc["adversary"]["rho"] == 0.1);
    CHECK(doc["adversary"]["mode"] == "linf-box");
    CHECK(doc["theory"] == false);
    CHECK_THROWS_AS(apply_overrides(doc, {"width"}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(doc, {"width.x=1"}), ConfigError);
}

TEST_CASE("resolved config round trips") {
    for (const std::string text : {R"({"preset": "theory", "rounds": 7})",
                                   R"({"preset": "experiment6", "eta_local": 5e-6, "data": {"scale": 1.5}})", "{}"}) {
        const RunConfig a = parse_config(text);
        const std::string dumped = to_json(a).dump(2);
        const RunConfig b = parse_config(dumped);
        CHECK(to_json(b).dump(2) == dumped);
    }
}

TEST_CASE("preset names") {
    const auto& names = preset_names();
    CHECK(std::find(names.begin(), names.end(), "theory") != names.end());
    CHECK(std::find(names.begin(), names.end(), "experiment6") != names.end());
}
