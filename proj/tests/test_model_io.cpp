#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "helpers.hpp"
#include "tracelr/direct.hpp"
#include "tracelr/error.hpp"
#include "tracelr/logistic.hpp"
#include "tracelr/model_io.hpp"

using namespace tracelr;
using testutil::error_code_of;

namespace {

DirectModel sample_direct_model() {
    DirectModel model;
    model.distance_kind = DistanceKind::spearman;
    model.feature_subset = {2, 5, 9};
    model.model_ss.weights = {0.3777215, 0.6222785};
    model.model_ss.means = {0.1234567890123456, 0.9};
    model.model_ss.variances = {0.0204, 0.11};
    model.model_ss.log_likelihood = -123.4567;
    model.model_ss.n_samples = 321;
    model.model_ds.weights = {0.5, 0.5};
    model.model_ds.means = {1.2, 1.9000000000000004};
    model.model_ds.variances = {0.25, 0.031};
    model.model_ds.log_likelihood = -456.789;
    model.model_ds.n_samples = 7654;
    return model;
}

LogisticModel sample_logistic_model() {
    LogisticModel model;
    model.mode = LogisticMode::vectorial;
    model.a = {-3.1415926535897931, 0.7071067811865476, 12.25};
    model.b = 1.9999999999999998;
    model.f_ss = 0.0123456789;
    model.f_ds = 1.0 - 0.0123456789;
    model.ridge = 0.5;
    model.converged = true;
    model.iterations = 17;
    return model;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_SUITE("model_io") {

TEST_CASE("direct models round-trip bit for bit through json") {
    const DirectModel model = sample_direct_model();
    const LoadedModel loaded = model_from_json(model_json(model));
    REQUIRE(loaded.flavor == ModelFlavor::direct);

    CHECK(loaded.direct.distance_kind == DistanceKind::spearman);
    CHECK(loaded.direct.feature_subset == model.feature_subset);
    for (int c = 0; c < 2; ++c) {
        CHECK(loaded.direct.model_ss.weights[c] == model.model_ss.weights[c]);
        CHECK(loaded.direct.model_ss.means[c] == model.model_ss.means[c]);
        CHECK(loaded.direct.model_ss.variances[c] == model.model_ss.variances[c]);
        CHECK(loaded.direct.model_ds.weights[c] == model.model_ds.weights[c]);
        CHECK(loaded.direct.model_ds.means[c] == model.model_ds.means[c]);
        CHECK(loaded.direct.model_ds.variances[c] == model.model_ds.variances[c]);
    }
    CHECK(loaded.direct.model_ss.log_likelihood == model.model_ss.log_likelihood);
    CHECK(loaded.direct.model_ss.n_samples == model.model_ss.n_samples);

    std::mt19937_64 rng(6101);
    std::uniform_real_distribution<double> d(0.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double x = d(rng);
        const LrValue before = direct_lr(model, x);
        const LrValue after = direct_lr(loaded.direct, x);
        CHECK(before.value == after.value);
        CHECK(before.log_value == after.log_value);
    }
}

TEST_CASE("logistic models round-trip bit for bit through json") {
    const LogisticModel model = sample_logistic_model();
    const LoadedModel loaded = model_from_json(model_json(model));
    REQUIRE(loaded.flavor == ModelFlavor::logistic);

    CHECK(loaded.logistic.mode == LogisticMode::vectorial);
    CHECK(loaded.logistic.a == model.a);
    CHECK(loaded.logistic.b == model.b);
    CHECK(loaded.logistic.f_ss == model.f_ss);
    CHECK(loaded.logistic.f_ds == model.f_ds);
    CHECK(loaded.logistic.ridge == model.ridge);
    CHECK(loaded.logistic.converged == model.converged);
    CHECK(loaded.logistic.iterations == model.iterations);

    std::mt19937_64 rng(6102);
    for (int i = 0; i < 100; ++i) {
        const auto d = testutil::random_vector(rng, model.a.size(), -2.0, 2.0);
        const LrValue before = indirect_lr(model, d);
        const LrValue after = indirect_lr(loaded.logistic, d);
        CHECK(before.value == after.value);
        CHECK(before.log_value == after.log_value);
        CHECK(logistic_output(model, d) == logistic_output(loaded.logistic, d));
    }
}

TEST_CASE("saved model files reload identically and leave no temp file") {
    const std::string path = temp_path("tracelr_model_roundtrip.json");
    const LogisticModel model = sample_logistic_model();
    save_model(model, path);
    CHECK(std::filesystem::exists(path));
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));

    const LoadedModel loaded = load_model(path);
    CHECK(loaded.logistic.a == model.a);
    CHECK(loaded.logistic.b == model.b);
    std::filesystem::remove(path);

    const std::string dpath = temp_path("tracelr_model_direct.json");
    save_model(sample_direct_model(), dpath);
    CHECK(load_model(dpath).flavor == ModelFlavor::direct);
    std::filesystem::remove(dpath);
}

TEST_CASE("model json exposes the pinned field layout") {
    const nlohmann::json dj = nlohmann::json::parse(model_json(sample_direct_model()));
    CHECK(dj.at("schema") == 1);
    CHECK(dj.at("kind") == "direct");
    CHECK(dj.at("distance_kind") == "spearman");
    CHECK(dj.at("feature_subset") == nlohmann::json::array({2, 5, 9}));
    for (const char* side : {"model_ss", "model_ds"}) {
        const auto& g = dj.at(side);
        CHECK(g.at("w").size() == 2);
        CHECK(g.at("mu").size() == 2);
        CHECK(g.at("sigma2").size() == 2);
        CHECK(g.contains("loglik"));
        CHECK(g.contains("n"));
    }

    const nlohmann::json lj = nlohmann::json::parse(model_json(sample_logistic_model()));
    CHECK(lj.at("schema") == 1);
    CHECK(lj.at("kind") == "logistic");
    CHECK(lj.at("mode") == "vectorial");
    CHECK(lj.at("a").size() == 3);
    for (const char* key : {"b", "f_ss", "f_ds", "ridge", "converged", "iterations"})
        CHECK(lj.contains(key));
}

TEST_CASE("truncated or malformed json is a parse error") {
    const std::string text = model_json(sample_logistic_model());
    CHECK(error_code_of([&] { model_from_json(text.substr(0, text.size() / 2)); }) ==
          ErrorCode::parse_error);
    CHECK(error_code_of([] { model_from_json(""); }) == ErrorCode::parse_error);
    CHECK(error_code_of([] { model_from_json("[]"); }) == ErrorCode::parse_error);
}

TEST_CASE("newer schema versions are refused without guessing") {
    nlohmann::json j = nlohmann::json::parse(model_json(sample_logistic_model()));
    j["schema"] = 2;
    CHECK(error_code_of([&] { model_from_json(j.dump()); }) == ErrorCode::version_error);
    j["schema"] = "1";
    CHECK(error_code_of([&] { model_from_json(j.dump()); }) == ErrorCode::version_error);
    j.erase("schema");
    CHECK(error_code_of([&] { model_from_json(j.dump()); }) == ErrorCode::parse_error);
}

TEST_CASE("field validation rejects broken models") {
    auto broken_logistic = [](auto mutate) {
        nlohmann::json j = nlohmann::json::parse(model_json(sample_logistic_model()));
        mutate(j);
        return error_code_of([text = j.dump()] { model_from_json(text); });
    };
    CHECK(broken_logistic([](nlohmann::json& j) { j["f_ss"] = 0.0; }) == ErrorCode::parse_error);
    CHECK(broken_logistic([](nlohmann::json& j) { j["f_ss"] = 1.0; }) == ErrorCode::parse_error);
    CHECK(broken_logistic([](nlohmann::json& j) { j["a"] = nlohmann::json::array(); }) ==
          ErrorCode::parse_error);
    CHECK(broken_logistic([](nlohmann::json& j) { j["a"][0] = nullptr; }) ==
          ErrorCode::parse_error);
    CHECK(broken_logistic([](nlohmann::json& j) { j["b"] = nullptr; }) == ErrorCode::parse_error);
    CHECK(broken_logistic([](nlohmann::json& j) { j.erase("f_ds"); }) == ErrorCode::parse_error);
    CHECK(broken_logistic([](nlohmann::json& j) { j["kind"] = "nearest"; }) ==
          ErrorCode::parse_error);

    auto broken_direct = [](auto mutate) {
        nlohmann::json j = nlohmann::json::parse(model_json(sample_direct_model()));
        mutate(j);
        return error_code_of([text = j.dump()] { model_from_json(text); });
    };
    CHECK(broken_direct([](nlohmann::json& j) { j["model_ss"]["sigma2"][0] = 0.0; }) ==
          ErrorCode::parse_error);
    CHECK(broken_direct([](nlohmann::json& j) { j["model_ds"]["sigma2"][1] = -1.0; }) ==
          ErrorCode::parse_error);
    CHECK(broken_direct([](nlohmann::json& j) { j["model_ss"]["mu"][0] = nullptr; }) ==
          ErrorCode::parse_error);
    CHECK(broken_direct([](nlohmann::json& j) { j["distance_kind"] = "cosine"; }) ==
          ErrorCode::config_error);
}

TEST_CASE("missing model files are io errors") {
    CHECK(error_code_of([] { load_model("/nonexistent/dir/model.json"); }) == ErrorCode::io_error);
}

} // TEST_SUITE
