#include <doctest.h>

#include <filesystem>

#include "support/fixtures.hpp"
#include "timecast/serialization.hpp"

using namespace timecast;

TEST_CASE("model set JSON round-trip") {
    const auto data = generate_synthetic(fixture::three_stage(5, 2, 15, 20)).collection;
    HyperParams h;
    h.k_init = 3;
    h.alpha = 0.3;
    auto result = learn(data, h, LearnOptions{.seed = 4});
    result.models.znormalize = true;
    const auto text = to_json(result.models).dump();
    const auto back = model_set_from_json(Json::parse(text));
    CHECK(back == result.models);
    CHECK(back.hyper == result.models.hyper);

    auto j = to_json(result.models);
    j["schema_version"] = 99;
    CHECK_THROWS_AS(model_set_from_json(j), SchemaError);
    j = to_json(result.models);
    j["stages"][0].erase("precision");
    CHECK_THROWS_AS(model_set_from_json(j), SchemaError);

    const auto report = to_json(result.report, data, result.assignments);
    CHECK(report["kind"] == "timecast.fit_report");
    CHECK(report["assignments"][data.sequences[0].instance_id()].get<std::vector<int>>() ==
          result.assignments[0].one_based());
}

TEST_CASE("prediction JSON round-trip") {
    PredictionOutput p;
    p.instance_id = "u7";
    p.tick = 12;
    p.stage = 2;
    p.params = {41.5, 0.25, 1.0};
    p.point_estimate = 41.5;
    p.raw_link = 41.5;
    const auto j = to_json(p);
    CHECK(j["stage"] == 3);
    const auto back = prediction_from_json(j);
    CHECK(back.stage == 2);
    CHECK(back.params == p.params);
    CHECK(back.instance_id == "u7");
}

TEST_CASE("synthetic spec JSON") {
    const auto j = Json::parse(R"({"n_instances": 3, "seed": 5,
        "stages": [{"mean": [0, 1], "precision": [1, 0, 0, 2], "duration": [4, 6]},
                   {"mean": [3, 3], "precision": [2, 0.5, 0.5, 1], "drift": [0.1, 0], "duration": [2, 2]}]})");
    const auto spec = synthetic_spec_from_json(j);
    CHECK(spec.stages.size() == 2);
    CHECK(spec.stages[1].precision(0, 1) == 0.5);
    CHECK(spec.stages[0].max_duration == 6);
    CHECK(spec.stages[1].drift.size() == 2);
    auto bad = j;
    bad["stages"][0]["duration"] = {4};
    CHECK_THROWS_AS(synthetic_spec_from_json(bad), SchemaError);
}

TEST_CASE("atomic writes replace the target") {
    const auto dir = std::filesystem::temp_directory_path() / "timecast_serialization_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "out.json").string();
    write_file_atomic(path, "first");
    write_file_atomic(path, "second");
    CHECK(read_file(path) == "second");
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(read_file(path), DataError);
}
