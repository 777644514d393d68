#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "tracelr/trace_matrix.hpp"

namespace tracelr {

// Synthetic panel: per-subject latent profiles on a log-intensity scale,
// exponentiated to peak areas. Informative features carry subject-specific
// level shifts (and subject-level presence patterns); uninformative features
// share one level across subjects (and per-trace presence), so they carry no
// identity signal.
struct PanelConfig {
    std::size_t n_subjects = 0;
    // replicate count -> number of subjects with that many replicates;
    // values must sum to n_subjects.
    std::map<std::size_t, std::size_t> replicate_profile;
    std::size_t n_features = 0;
    std::size_t n_informative = 0; // the first n_informative features
    double between_subject_sd = 1.0;
    double within_subject_sd = 0.1;
    double sparsity = 0.0;        // probability a compound is absent
    double gender_fraction = 0.5; // probability a subject is male
    // Linear ramp of informative-feature strength: feature t of n_informative
    // gets between_subject_sd scaled by 1 - decay * t / (n_informative - 1),
    // so 0 keeps all strengths equal and 1 fades the last one to zero.
    double informative_strength_decay = 0.0;
    std::uint64_t seed = 0;
};

// Deterministic per config+seed, bit for bit.
TraceMatrix generate_panel(const PanelConfig& cfg);

std::string panel_config_json(const PanelConfig& cfg);
PanelConfig panel_config_from_json(const std::string& text);

} // namespace tracelr
