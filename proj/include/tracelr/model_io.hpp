#pragma once

#include <cstdint>
#include <string>

#include "tracelr/direct.hpp"
#include "tracelr/logistic.hpp"

namespace tracelr {

enum class ModelFlavor : std::uint8_t { direct, logistic };

struct LoadedModel {
    ModelFlavor flavor = ModelFlavor::logistic;
    DirectModel direct;
    LogisticModel logistic;
};

// JSON round-trips are exact: doubles are written with 17 significant digits,
// so a loaded model reproduces the saved one's outputs bit for bit.
std::string model_json(const DirectModel& model);
std::string model_json(const LogisticModel& model);
LoadedModel model_from_json(const std::string& text);

// Files carry a top-level "schema" version; reading a newer schema raises a
// version error rather than guessing. Writes are atomic (temp + rename).
void save_model(const DirectModel& model, const std::string& path);
void save_model(const LogisticModel& model, const std::string& path);
LoadedModel load_model(const std::string& path);

} // namespace tracelr
