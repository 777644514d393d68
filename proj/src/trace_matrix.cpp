#include "tracelr/trace_matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tracelr/error.hpp"
#include "tracelr/rng.hpp"
#include "tracelr/stats_util.hpp"

namespace tracelr {

const char* mode_name(Mode mode) {
    switch (mode) {
        case Mode::raw: return "raw";
        case Mode::normalized_log: return "normalized_log";
        case Mode::dichotomized: return "dichotomized";
    }
    return "raw";
}

Mode mode_from_name(const std::string& name) {
    if (name == "raw") return Mode::raw;
    if (name == "normalized_log") return Mode::normalized_log;
    if (name == "dichotomized") return Mode::dichotomized;
    throw Error(ErrorCode::schema_error, "unknown mode '" + name + "'");
}

const char* gender_name(Gender gender) {
    switch (gender) {
        case Gender::male: return "M";
        case Gender::female: return "F";
        case Gender::unknown: return "";
    }
    return "";
}

TraceMatrix::TraceMatrix(std::vector<TraceInfo> info, std::vector<double> data,
                         std::size_t n_features, Mode mode,
                         std::vector<std::string> feature_names)
    : info_(std::move(info)),
      data_(std::move(data)),
      n_features_(n_features),
      feature_names_(std::move(feature_names)),
      mode_(mode) {
    if (n_features_ == 0) {
        throw Error(ErrorCode::schema_error, "a trace matrix needs at least one feature column");
    }
    if (data_.size() != info_.size() * n_features_) {
        throw Error(ErrorCode::schema_error, "feature block size does not match trace count");
    }
    if (!feature_names_.empty() && feature_names_.size() != n_features_) {
        throw Error(ErrorCode::schema_error, "feature name list length does not match n_features");
    }

    std::unordered_set<std::string> seen;
    seen.reserve(info_.size());
    for (const auto& t : info_) {
        if (!seen.insert(t.subject_id + "\x1f" + t.replicate_id).second) {
            throw Error(ErrorCode::duplicate_trace,
                        "(" + t.subject_id + ", " + t.replicate_id + ") appears more than once");
        }
    }

    for (std::size_t i = 0; i < info_.size(); ++i) {
        auto r = row(i);
        double sum = 0.0;
        for (double v : r) {
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::parse_error,
                            "non-finite feature value in trace " + info_[i].subject_id + "/" +
                                info_[i].replicate_id);
            }
            if (mode_ != Mode::normalized_log && v < 0.0) {
                throw Error(ErrorCode::parse_error,
                            "negative feature value in trace " + info_[i].subject_id + "/" +
                                info_[i].replicate_id);
            }
            if (mode_ == Mode::dichotomized && v != 0.0 && v != 1.0) {
                throw Error(ErrorCode::parse_error,
                            "dichotomized entry not in {0,1} in trace " + info_[i].subject_id +
                                "/" + info_[i].replicate_id);
            }
            sum += v;
        }
        if (mode_ == Mode::normalized_log && std::abs(sum - 1.0) > 1e-9) {
            throw Error(ErrorCode::normalization_error,
                        "normalized row does not sum to 1 for trace " + info_[i].subject_id + "/" +
                            info_[i].replicate_id);
        }
    }
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> TraceMatrix::subjects() const {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < info_.size(); ++i) {
        auto [it, inserted] = index.try_emplace(info_[i].subject_id, groups.size());
        if (inserted) groups.push_back({info_[i].subject_id, {}});
        groups[it->second].second.push_back(i);
    }
    return groups;
}

TraceMatrix TraceMatrix::select_traces(std::span<const std::size_t> indices) const {
    std::vector<TraceInfo> info;
    std::vector<double> data;
    info.reserve(indices.size());
    data.reserve(indices.size() * n_features_);
    for (std::size_t idx : indices) {
        info.push_back(info_[idx]);
        auto r = row(idx);
        data.insert(data.end(), r.begin(), r.end());
    }
    return TraceMatrix(std::move(info), std::move(data), n_features_, mode_, feature_names_);
}

std::uint64_t TraceMatrix::fingerprint() const {
    Fnv1a64 hash;
    hash.update_u64(info_.size());
    hash.update_u64(n_features_);
    hash.update_u64(static_cast<std::uint64_t>(mode_));
    for (const auto& t : info_) {
        hash.update(t.subject_id.data(), t.subject_id.size());
        hash.update("\x1f", 1);
        hash.update(t.replicate_id.data(), t.replicate_id.size());
        hash.update("\x1e", 1);
    }
    for (double v : data_) hash.update_double(v);
    return hash.digest();
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

double parse_double_strict(const std::string& field, std::size_t line_no,
                           const std::string& origin) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::parse_error, origin + " line " + std::to_string(line_no) +
                                                ": non-numeric feature value '" + field + "'");
    }
    return value;
}

Gender parse_gender(std::string field) {
    std::transform(field.begin(), field.end(), field.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (field == "m" || field == "male") return Gender::male;
    if (field == "f" || field == "female") return Gender::female;
    if (field.empty() || field == "u" || field == "unknown" || field == "na") {
        return Gender::unknown;
    }
    throw Error(ErrorCode::parse_error, "unrecognized gender '" + field + "'");
}

void format_double(std::string& out, double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    out.append(buf, ptr);
}

} // namespace

TraceMatrix parse_csv(const std::string& text, const CsvSchema& schema,
                      const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    Mode mode = Mode::raw;

    // Header: first non-comment line. "#mode:" comments set the mode.
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string prefix = "#mode:";
            if (line.rfind(prefix, 0) == 0) {
                std::string value = line.substr(prefix.size());
                value.erase(0, value.find_first_not_of(" \t"));
                value.erase(value.find_last_not_of(" \t\r") + 1);
                mode = mode_from_name(value);
            }
            continue;
        }
        header = split_line(line);
        break;
    }
    if (header.empty()) {
        throw Error(ErrorCode::schema_error, origin + ": empty file (no header row)");
    }

    long subject_col = -1, replicate_col = -1, gender_col = -1, age_col = -1;
    std::vector<std::size_t> feature_cols;
    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (name == schema.subject_column) {
            subject_col = static_cast<long>(c);
        } else if (name == schema.replicate_column) {
            replicate_col = static_cast<long>(c);
        } else if (name == schema.gender_column) {
            gender_col = static_cast<long>(c);
        } else if (name == schema.age_column) {
            age_col = static_cast<long>(c);
        } else {
            feature_cols.push_back(c);
            feature_names.push_back(name);
        }
    }
    if (subject_col < 0 || replicate_col < 0) {
        throw Error(ErrorCode::schema_error,
                    origin + ": header must name '" + schema.subject_column + "' and '" +
                        schema.replicate_column + "' columns");
    }
    if (feature_cols.empty()) {
        throw Error(ErrorCode::schema_error, origin + ": no feature columns in header");
    }

    std::vector<TraceInfo> info;
    std::vector<double> data;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_line(line);
        if (fields.size() != header.size()) {
            throw Error(ErrorCode::parse_error,
                        origin + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        TraceInfo t;
        t.subject_id = fields[static_cast<std::size_t>(subject_col)];
        t.replicate_id = fields[static_cast<std::size_t>(replicate_col)];
        if (gender_col >= 0) t.gender = parse_gender(fields[static_cast<std::size_t>(gender_col)]);
        if (age_col >= 0) {
            const std::string& a = fields[static_cast<std::size_t>(age_col)];
            if (!a.empty()) {
                int age = 0;
                auto [ptr, ec] = std::from_chars(a.data(), a.data() + a.size(), age);
                if (ec != std::errc() || ptr != a.data() + a.size() || age < 0) {
                    throw Error(ErrorCode::parse_error, origin + " line " +
                                                            std::to_string(line_no) +
                                                            ": bad age '" + a + "'");
                }
                t.age = static_cast<unsigned>(age);
            }
        }
        for (std::size_t c : feature_cols) {
            const double v = parse_double_strict(fields[c], line_no, origin);
            if (mode != Mode::normalized_log && v < 0.0) {
                throw Error(ErrorCode::parse_error, origin + " line " + std::to_string(line_no) +
                                                        ": negative feature value");
            }
            data.push_back(v);
        }
        info.push_back(std::move(t));
    }
    if (info.empty()) {
        throw Error(ErrorCode::schema_error, origin + ": no data rows");
    }
    return TraceMatrix(std::move(info), std::move(data), feature_cols.size(), mode,
                       std::move(feature_names));
}

TraceMatrix ingest_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), schema, path);
}

std::string format_csv(const TraceMatrix& m, const std::vector<std::string>& extra_comments) {
    std::string out;
    out += "#mode: ";
    out += mode_name(m.mode());
    out += "\n";
    for (const auto& c : extra_comments) {
        out += c;
        out += "\n";
    }

    bool any_gender = false, any_age = false;
    for (const auto& t : m.traces()) {
        any_gender |= t.gender != Gender::unknown;
        any_age |= t.age.has_value();
    }

    out += "subject_id,replicate_id";
    if (any_gender) out += ",gender";
    if (any_age) out += ",age";
    for (std::size_t k = 0; k < m.n_features(); ++k) {
        out += ',';
        out += m.feature_names().empty() ? "f_" + std::to_string(k + 1) : m.feature_names()[k];
    }
    out += '\n';

    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& t = m.info(i);
        out += t.subject_id;
        out += ',';
        out += t.replicate_id;
        if (any_gender) {
            out += ',';
            out += gender_name(t.gender);
        }
        if (any_age) {
            out += ',';
            if (t.age) out += std::to_string(*t.age);
        }
        for (double v : m.row(i)) {
            out += ',';
            format_double(out, v);
        }
        out += '\n';
    }
    return out;
}

void emit_csv(const TraceMatrix& m, const std::string& path,
              const std::vector<std::string>& extra_comments) {
    const std::string body = format_csv(m, extra_comments);
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

TraceMatrix normalize_log(const TraceMatrix& m) {
    if (m.mode() != Mode::raw) {
        throw Error(ErrorCode::normalization_error, "normalize_log expects a raw matrix");
    }
    std::vector<double> data(m.size() * m.n_features());
    for (std::size_t i = 0; i < m.size(); ++i) {
        auto r = m.row(i);
        double total = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) {
            const double t = std::log1p(r[k]);
            data[i * m.n_features() + k] = t;
            total += t;
        }
        if (total <= 0.0) {
            throw Error(ErrorCode::normalization_error,
                        "all-zero trace " + m.info(i).subject_id + "/" + m.info(i).replicate_id);
        }
        for (std::size_t k = 0; k < r.size(); ++k) {
            data[i * m.n_features() + k] /= total;
        }
    }
    return TraceMatrix(m.traces(), std::move(data), m.n_features(), Mode::normalized_log,
                       m.feature_names());
}

TraceMatrix dichotomize(const TraceMatrix& m, double threshold) {
    if (m.mode() == Mode::normalized_log) {
        throw Error(ErrorCode::normalization_error,
                    "dichotomize expects raw (or already dichotomized) areas");
    }
    std::vector<double> data(m.size() * m.n_features());
    for (std::size_t i = 0; i < m.data().size(); ++i) {
        data[i] = m.data()[i] > threshold ? 1.0 : 0.0;
    }
    return TraceMatrix(m.traces(), std::move(data), m.n_features(), Mode::dichotomized,
                       m.feature_names());
}

namespace {

// Nearest integer when fraction*count is within rounding dust of one,
// otherwise ceil; clamped so groups of >= 2 subjects feed both sides.
std::size_t calibration_take(double fraction, std::size_t count) {
    const double target = fraction * static_cast<double>(count);
    const double rounded = std::round(target);
    std::size_t k = std::abs(target - rounded) < 1e-9 ? static_cast<std::size_t>(rounded)
                                                      : static_cast<std::size_t>(std::ceil(target));
    if (count >= 2) {
        k = std::clamp<std::size_t>(k, 1, count - 1);
    } else {
        k = std::min<std::size_t>(k, count);
    }
    return k;
}

} // namespace

std::pair<TraceMatrix, TraceMatrix> split_calibration_test(const TraceMatrix& m,
                                                           const SplitConfig& cfg) {
    if (!(cfg.calibration_fraction > 0.0 && cfg.calibration_fraction < 1.0)) {
        throw Error(ErrorCode::split_error, "calibration fraction must be in (0, 1)");
    }
    auto groups = m.subjects();
    if (groups.size() < 2) {
        throw Error(ErrorCode::split_error, "need at least 2 subjects to split");
    }

    // Group subjects (by gender when stratifying), shuffle each group with
    // the seeded generator, take the first `calibration_take` of each.
    std::vector<std::vector<std::size_t>> strata; // subject indices into groups
    if (cfg.stratify_gender) {
        strata.assign(3, {});
        for (std::size_t s = 0; s < groups.size(); ++s) {
            const Gender g = m.info(groups[s].second.front()).gender;
            strata[static_cast<std::size_t>(g)].push_back(s);
        }
        strata.erase(std::remove_if(strata.begin(), strata.end(),
                                    [](const auto& v) { return v.empty(); }),
                     strata.end());
    } else {
        strata.emplace_back(groups.size());
        for (std::size_t s = 0; s < groups.size(); ++s) strata[0][s] = s;
    }

    Rng rng(cfg.seed);
    std::vector<std::size_t> cal_traces, test_traces;
    for (auto& stratum : strata) {
        rng.shuffle(stratum);
        const std::size_t take = calibration_take(cfg.calibration_fraction, stratum.size());
        for (std::size_t pos = 0; pos < stratum.size(); ++pos) {
            const auto& trace_ids = groups[stratum[pos]].second;
            auto& dest = pos < take ? cal_traces : test_traces;
            dest.insert(dest.end(), trace_ids.begin(), trace_ids.end());
        }
    }
    if (cal_traces.empty() || test_traces.empty()) {
        throw Error(ErrorCode::split_error, "split left one side empty; adjust the fraction");
    }
    std::sort(cal_traces.begin(), cal_traces.end());
    std::sort(test_traces.begin(), test_traces.end());
    return {m.select_traces(cal_traces), m.select_traces(test_traces)};
}

std::string RepeatabilityReport::format() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.1f [%.1f ; %.1f]", median_rsd, iqi_low, iqi_high);
    return buf;
}

RepeatabilityReport repeatability(const TraceMatrix& m) {
    auto groups = m.subjects();
    bool any_replicated = false;
    for (const auto& [id, idx] : groups) any_replicated |= idx.size() >= 2;
    if (!any_replicated) {
        throw Error(ErrorCode::diagnostic_error, "no subject has 2 or more replicates");
    }

    RepeatabilityReport report;
    report.per_feature_rsd.assign(m.n_features(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> values, subject_rsd, summaries;
    for (std::size_t k = 0; k < m.n_features(); ++k) {
        subject_rsd.clear();
        for (const auto& [id, idx] : groups) {
            if (idx.size() < 2) continue;
            values.clear();
            for (std::size_t i : idx) values.push_back(m.row(i)[k]);
            const double mu = mean(values);
            if (mu <= 0.0) continue;
            subject_rsd.push_back(100.0 * sample_sd(values) / mu);
        }
        if (!subject_rsd.empty()) {
            report.per_feature_rsd[k] = median(subject_rsd);
            summaries.push_back(report.per_feature_rsd[k]);
        }
    }
    if (summaries.empty()) {
        throw Error(ErrorCode::diagnostic_error,
                    "no feature has a replicated subject with a positive mean");
    }
    report.median_rsd = median(summaries);
    report.iqi_low = quantile(summaries, 0.25);
    report.iqi_high = quantile(summaries, 0.75);
    return report;
}

} // namespace tracelr
