#include "tracelr/model_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "tracelr/error.hpp"
#include "tracelr/version.hpp"

namespace tracelr {

namespace {

using nlohmann::json;

json gmm_to_json(const Gmm2& g) {
    return json{{"w", {g.weights[0], g.weights[1]}},
                {"mu", {g.means[0], g.means[1]}},
                {"sigma2", {g.variances[0], g.variances[1]}},
                {"loglik", g.log_likelihood},
                {"n", g.n_samples}};
}

Gmm2 gmm_from_json(const json& j) {
    Gmm2 g;
    for (int c = 0; c < 2; ++c) {
        g.weights[c] = j.at("w").at(c).get<double>();
        g.means[c] = j.at("mu").at(c).get<double>();
        g.variances[c] = j.at("sigma2").at(c).get<double>();
        if (!std::isfinite(g.weights[c]) || !std::isfinite(g.means[c]) ||
            !(g.variances[c] > 0.0))
            throw Error(ErrorCode::parse_error, "mixture parameters must be finite, variances positive");
    }
    g.log_likelihood = j.at("loglik").get<double>();
    g.n_samples = j.at("n").get<std::size_t>();
    return g;
}

void check_schema(const json& j) {
    if (!j.contains("schema"))
        throw Error(ErrorCode::parse_error, "model file lacks a schema field");
    if (!j.at("schema").is_number_integer() ||
        j.at("schema").get<int>() != kModelSchemaVersion)
        throw Error(ErrorCode::version_error,
                    "model schema " + j.at("schema").dump() + " not supported (this tool reads " +
                        std::to_string(kModelSchemaVersion) + ")");
}

void write_atomic(const std::string& path, const std::string& body) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io_error, "cannot write '" + tmp + "'");
        out << body;
        if (!out) throw Error(ErrorCode::io_error, "write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot rename '" + tmp + "' to '" + path + "'");
}

} // namespace

std::string model_json(const DirectModel& model) {
    const json j{{"schema", kModelSchemaVersion},
                 {"kind", "direct"},
                 {"distance_kind", distance_kind_name(model.distance_kind)},
                 {"feature_subset", model.feature_subset},
                 {"model_ss", gmm_to_json(model.model_ss)},
                 {"model_ds", gmm_to_json(model.model_ds)}};
    return j.dump(2) + "\n";
}

std::string model_json(const LogisticModel& model) {
    const json j{{"schema", kModelSchemaVersion},
                 {"kind", "logistic"},
                 {"mode", logistic_mode_name(model.mode)},
                 {"a", model.a},
                 {"b", model.b},
                 {"f_ss", model.f_ss},
                 {"f_ds", model.f_ds},
                 {"ridge", model.ridge},
                 {"converged", model.converged},
                 {"iterations", model.iterations}};
    return j.dump(2) + "\n";
}

LoadedModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("model file: ") + e.what());
    }
    check_schema(j);
    LoadedModel loaded;
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "direct") {
            loaded.flavor = ModelFlavor::direct;
            loaded.direct.distance_kind =
                distance_kind_from_name(j.at("distance_kind").get<std::string>());
            loaded.direct.feature_subset =
                j.at("feature_subset").get<std::vector<std::size_t>>();
            loaded.direct.model_ss = gmm_from_json(j.at("model_ss"));
            loaded.direct.model_ds = gmm_from_json(j.at("model_ds"));
        } else if (kind == "logistic") {
            loaded.flavor = ModelFlavor::logistic;
            auto& m = loaded.logistic;
            m.mode = logistic_mode_from_name(j.at("mode").get<std::string>());
            m.a = j.at("a").get<std::vector<double>>();
            m.b = j.at("b").get<double>();
            m.f_ss = j.at("f_ss").get<double>();
            m.f_ds = j.at("f_ds").get<double>();
            m.ridge = j.at("ridge").get<double>();
            m.converged = j.at("converged").get<bool>();
            m.iterations = j.at("iterations").get<int>();
            if (m.a.empty()) throw Error(ErrorCode::parse_error, "empty coefficient vector");
            for (const double a : m.a)
                if (!std::isfinite(a))
                    throw Error(ErrorCode::parse_error, "coefficients must be finite");
            if (!std::isfinite(m.b))
                throw Error(ErrorCode::parse_error, "intercept must be finite");
            if (!(m.f_ss > 0.0 && m.f_ss < 1.0))
                throw Error(ErrorCode::parse_error, "f_ss must lie strictly inside (0, 1)");
        } else {
            throw Error(ErrorCode::parse_error, "unknown model kind '" + kind + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("model file: ") + e.what());
    }
    return loaded;
}

void save_model(const DirectModel& model, const std::string& path) {
    write_atomic(path, model_json(model));
}

void save_model(const LogisticModel& model, const std::string& path) {
    write_atomic(path, model_json(model));
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return model_from_json(buffer.str());
}

} // namespace tracelr
