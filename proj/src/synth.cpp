#include "tracelr/synth.hpp"

#include <cmath>
#include <vector>

#include "json.hpp"

#include "tracelr/error.hpp"
#include "tracelr/rng.hpp"

namespace tracelr {

namespace {

// Typical log peak-area level; features spread around it so magnitudes differ.
constexpr double kBaseLogMean = 4.0;
constexpr double kBaseLogSd = 0.5;

void validate(const PanelConfig& cfg) {
    if (cfg.n_subjects == 0) throw Error(ErrorCode::config_error, "need at least one subject");
    if (cfg.n_features == 0) throw Error(ErrorCode::config_error, "need at least one feature");
    if (cfg.n_informative > cfg.n_features)
        throw Error(ErrorCode::config_error, "n_informative exceeds n_features");
    if (cfg.replicate_profile.empty())
        throw Error(ErrorCode::config_error, "replicate profile is empty");
    std::size_t total = 0;
    for (const auto& [reps, count] : cfg.replicate_profile) {
        if (reps == 0) throw Error(ErrorCode::config_error, "replicate counts must be positive");
        total += count;
    }
    if (total != cfg.n_subjects)
        throw Error(ErrorCode::config_error,
                    "replicate profile covers " + std::to_string(total) + " subjects, expected " +
                        std::to_string(cfg.n_subjects));
    if (!(cfg.between_subject_sd > 0.0))
        throw Error(ErrorCode::config_error, "between_subject_sd must be positive");
    if (cfg.within_subject_sd < 0.0)
        throw Error(ErrorCode::config_error, "within_subject_sd must be non-negative");
    if (!(cfg.sparsity >= 0.0 && cfg.sparsity < 1.0))
        throw Error(ErrorCode::config_error, "sparsity must lie in [0, 1)");
    if (!(cfg.gender_fraction >= 0.0 && cfg.gender_fraction <= 1.0))
        throw Error(ErrorCode::config_error, "gender_fraction must lie in [0, 1]");
    if (!(cfg.informative_strength_decay >= 0.0 && cfg.informative_strength_decay <= 1.0))
        throw Error(ErrorCode::config_error, "informative_strength_decay must lie in [0, 1]");
}

std::string subject_id(std::size_t index, int width) {
    std::string digits = std::to_string(index + 1);
    if (static_cast<int>(digits.size()) < width)
        digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    return "S" + digits;
}

} // namespace

TraceMatrix generate_panel(const PanelConfig& cfg) {
    validate(cfg);

    std::vector<std::size_t> replicates_of;
    replicates_of.reserve(cfg.n_subjects);
    for (const auto& [reps, count] : cfg.replicate_profile)
        for (std::size_t c = 0; c < count; ++c) replicates_of.push_back(reps);

    const std::size_t n_inf = cfg.n_informative;
    std::vector<double> strength(n_inf);
    for (std::size_t t = 0; t < n_inf; ++t) {
        const double ramp =
            n_inf > 1 ? static_cast<double>(t) / static_cast<double>(n_inf - 1) : 0.0;
        strength[t] = cfg.between_subject_sd * (1.0 - cfg.informative_strength_decay * ramp);
    }

    Rng rng(cfg.seed);
    std::vector<double> base(cfg.n_features);
    for (auto& b : base) b = rng.normal(kBaseLogMean, kBaseLogSd);

    const int width = static_cast<int>(std::to_string(cfg.n_subjects).size());
    std::vector<TraceInfo> info;
    std::vector<double> data;
    std::vector<double> effect(n_inf);
    std::vector<char> present(n_inf);

    for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
        const Gender gender =
            rng.uniform01() < cfg.gender_fraction ? Gender::male : Gender::female;
        for (std::size_t t = 0; t < n_inf; ++t) effect[t] = rng.normal(0.0, strength[t]);
        for (std::size_t t = 0; t < n_inf; ++t)
            present[t] = rng.uniform01() >= cfg.sparsity ? 1 : 0;

        for (std::size_t r = 0; r < replicates_of[s]; ++r) {
            info.push_back({subject_id(s, width), "r" + std::to_string(r + 1), gender, {}});
            for (std::size_t k = 0; k < cfg.n_features; ++k) {
                if (k < n_inf) {
                    const double noise = rng.normal(0.0, cfg.within_subject_sd);
                    data.push_back(present[k] ? std::exp(base[k] + effect[k] + noise) : 0.0);
                } else {
                    const bool here = rng.uniform01() >= cfg.sparsity;
                    const double noise = rng.normal(0.0, cfg.within_subject_sd);
                    data.push_back(here ? std::exp(base[k] + noise) : 0.0);
                }
            }
        }
    }
    return TraceMatrix(std::move(info), std::move(data), cfg.n_features, Mode::raw);
}

std::string panel_config_json(const PanelConfig& cfg) {
    nlohmann::json profile = nlohmann::json::object();
    for (const auto& [reps, count] : cfg.replicate_profile)
        profile[std::to_string(reps)] = count;
    const nlohmann::json j{{"n_subjects", cfg.n_subjects},
                           {"replicate_profile", profile},
                           {"n_features", cfg.n_features},
                           {"n_informative", cfg.n_informative},
                           {"between_subject_sd", cfg.between_subject_sd},
                           {"within_subject_sd", cfg.within_subject_sd},
                           {"sparsity", cfg.sparsity},
                           {"gender_fraction", cfg.gender_fraction},
                           {"informative_strength_decay", cfg.informative_strength_decay},
                           {"seed", cfg.seed}};
    return j.dump();
}

PanelConfig panel_config_from_json(const std::string& text) {
    PanelConfig cfg;
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        cfg.n_subjects = j.at("n_subjects").get<std::size_t>();
        for (const auto& [key, value] : j.at("replicate_profile").items())
            cfg.replicate_profile[std::stoull(key)] = value.get<std::size_t>();
        cfg.n_features = j.at("n_features").get<std::size_t>();
        cfg.n_informative = j.at("n_informative").get<std::size_t>();
        cfg.between_subject_sd = j.at("between_subject_sd").get<double>();
        cfg.within_subject_sd = j.at("within_subject_sd").get<double>();
        cfg.sparsity = j.at("sparsity").get<double>();
        cfg.gender_fraction = j.at("gender_fraction").get<double>();
        cfg.informative_strength_decay = j.value("informative_strength_decay", 0.0);
        cfg.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("panel config: ") + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("panel config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

} // namespace tracelr
