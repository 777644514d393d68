// Command-line front-end: synthesis, ingestion, transforms, pair/distance
// work, model fitting, selection, evaluation and one-pair comparison.
// Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tracelr/error.hpp"
#include "tracelr/evaluation.hpp"
#include "tracelr/feature_select.hpp"
#include "tracelr/model_io.hpp"
#include "tracelr/stats_util.hpp"
#include "tracelr/synth.hpp"
#include "tracelr/version.hpp"

namespace {

using nlohmann::json;
using namespace tracelr;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_fingerprint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
    Fnv1a64 hash;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        hash.update(buf, static_cast<std::size_t>(in.gcount()));
    return "fnv1a:" + hex64(hash.digest());
}

void write_text_atomic(const std::string& path, const std::string& body) {
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

// Everything needed to reproduce a run: config snapshot, input fingerprints,
// seed and tool version. The run id hashes those (wall time excluded), so
// re-running the same command on the same inputs reproduces it.
struct RunContext {
    std::string command;
    json config = json::object();
    json inputs = json::object();
    std::uint64_t seed = 0;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void add_input(const std::string& path) { inputs[path] = file_fingerprint(path); }

    std::string run_id() const {
        const json core{{"command", command},
                        {"config", config},
                        {"inputs", inputs},
                        {"seed", seed},
                        {"tool_version", kToolVersion}};
        const std::string s = core.dump();
        Fnv1a64 hash;
        hash.update(s.data(), s.size());
        return hex64(hash.digest());
    }

    std::string manifest_path(const std::string& primary_output) const {
        return primary_output + ".manifest.json";
    }

    void write_manifest(const std::string& primary_output) const {
        const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
        const json m{{"schema", 1},
                     {"run_id", run_id()},
                     {"command", command},
                     {"config", config},
                     {"inputs", inputs},
                     {"seed", seed},
                     {"tool_version", kToolVersion},
                     {"wall_ms", wall_ms}};
        write_text_atomic(manifest_path(primary_output), m.dump(2) + "\n");
    }

    std::vector<std::string> csv_comments(const std::string& primary_output) const {
        return {"#run_id: " + run_id(), "#manifest: " + manifest_path(primary_output)};
    }

    // JSON outputs carry the same references inline.
    void stamp(json& j, const std::string& primary_output) const {
        j["run_id"] = run_id();
        j["manifest"] = manifest_path(primary_output);
    }
};

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t value = 0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), value);
        if (res.ec != std::errc{} || res.ptr != item.data() + item.size())
            throw UsageError(std::string(what) + ": '" + item + "' is not a non-negative integer");
        out.push_back(value);
    }
    if (out.empty()) throw UsageError(std::string(what) + ": empty list");
    return out;
}

std::map<std::size_t, std::size_t> parse_profile(const std::string& text) {
    std::map<std::size_t, std::size_t> profile;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw UsageError("--profile entries look like REPLICATES:SUBJECTS, got '" + item + "'");
        std::size_t reps = 0, count = 0;
        const auto r1 = std::from_chars(item.data(), item.data() + colon, reps);
        const auto r2 =
            std::from_chars(item.data() + colon + 1, item.data() + item.size(), count);
        if (r1.ec != std::errc{} || r1.ptr != item.data() + colon || r2.ec != std::errc{} ||
            r2.ptr != item.data() + item.size())
            throw UsageError("--profile entries look like REPLICATES:SUBJECTS, got '" + item + "'");
        profile[reps] += count;
    }
    if (profile.empty()) throw UsageError("--profile: empty profile");
    return profile;
}

// Top-count features of a `select` ranking CSV (rank,feature_index,...).
std::vector<std::size_t> ranking_subset(const std::string& path, std::size_t count) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
    std::vector<std::size_t> order;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("rank,feature_index", 0) != 0)
                throw Error(ErrorCode::parse_error,
                            "'" + path + "' is not a ranking file (expected rank,feature_index header)");
            header_seen = true;
            continue;
        }
        const auto c1 = line.find(',');
        if (c1 == std::string::npos) continue;
        const auto c2 = line.find(',', c1 + 1);
        const std::string idx = line.substr(c1 + 1, c2 - c1 - 1);
        std::size_t value = 0;
        const auto res = std::from_chars(idx.data(), idx.data() + idx.size(), value);
        if (res.ec != std::errc{})
            throw Error(ErrorCode::parse_error, "bad feature index '" + idx + "' in " + path);
        order.push_back(value);
    }
    if (order.size() < count)
        throw Error(ErrorCode::config_error, "ranking lists " + std::to_string(order.size()) +
                                                 " features, need " + std::to_string(count));
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

// Shared flags describing a method + fit options.
struct MethodFlags {
    std::string method = "indirect-scalar";
    std::string distance; // empty = default for the method
    std::string features; // explicit index list
    std::string ranking;  // ranking CSV from `select`
    std::size_t count = 0;
    double prior = 0.5;
    double ridge = 0.0;
    int max_iter = 100;
    double tol = 1e-8;
    std::size_t subsample_ds = 0;
    std::uint64_t subsample_seed = 0;
    int restarts = 3;
    std::uint64_t gmm_seed = 0;
    int threads = 0;

    void register_common(CLI::App* cmd, bool with_subset) {
        cmd->add_option("--method", method, "direct | indirect-scalar | indirect-vectorial")
            ->check(CLI::IsMember({"direct", "indirect-scalar", "indirect-vectorial"}));
        cmd->add_option("--distance", distance,
                        "euclidean | pearson | spearman | vectorial (default: spearman for "
                        "scalar methods)")
            ->check(CLI::IsMember({"euclidean", "pearson", "spearman", "vectorial"}));
        if (with_subset) {
            auto* f = cmd->add_option("--features", features, "comma-separated feature indices");
            auto* r = cmd->add_option("--ranking", ranking,
                                      "ranking CSV from `select`; use with --count");
            cmd->add_option("--count", count, "take the top COUNT ranked features")->needs(r);
            f->excludes(r);
        }
        cmd->add_option("--ridge", ridge, "L2 penalty on the coefficients (not the intercept)")
            ->check(CLI::NonNegativeNumber);
        cmd->add_option("--max-iter", max_iter, "iteration cap for the logistic fit")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--tol", tol, "gradient tolerance for the logistic fit");
        cmd->add_option("--subsample-ds", subsample_ds,
                        "cap on different-source pairs entering the fit (0 = all)");
        cmd->add_option("--subsample-seed", subsample_seed, "seed for the subsample draw");
        cmd->add_option("--restarts", restarts, "EM restarts for the direct method")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--gmm-seed", gmm_seed, "seed for the EM restarts");
        cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
    }

    MethodConfig build() const {
        MethodConfig mc;
        mc.kind = method_kind_from_name(method);
        if (mc.kind == MethodKind::indirect_vectorial) {
            if (!distance.empty() && distance != "vectorial")
                throw UsageError("indirect-vectorial always uses the vectorial distance; drop "
                                 "--distance or pass 'vectorial'");
            mc.distance = DistanceKind::vectorial;
        } else {
            const std::string name = distance.empty() ? "spearman" : distance;
            if (name == "vectorial")
                throw UsageError(std::string(method_kind_name(mc.kind)) +
                                 " supports scalar distances only (euclidean, pearson, spearman)");
            mc.distance = distance_kind_from_name(name);
        }
        if (!features.empty()) mc.feature_subset = parse_size_list(features, "--features");
        if (!ranking.empty()) {
            if (count == 0) throw UsageError("--ranking needs --count");
            mc.feature_subset = ranking_subset(ranking, count);
        }
        mc.prior_ss = prior;
        mc.logistic.ridge = ridge;
        mc.logistic.max_iter = max_iter;
        mc.logistic.tol = tol;
        mc.subsample_ds = subsample_ds;
        mc.subsample_seed = subsample_seed;
        mc.direct.restarts = restarts;
        mc.direct.seed = gmm_seed;
        mc.threads = threads;
        return mc;
    }

    json config_json(const MethodConfig& mc) const {
        return json{{"method", method_kind_name(mc.kind)},
                    {"distance", distance_kind_name(mc.distance)},
                    {"feature_subset", mc.feature_subset},
                    {"prior", mc.prior_ss},
                    {"ridge", mc.logistic.ridge},
                    {"max_iter", mc.logistic.max_iter},
                    {"tol", mc.logistic.tol},
                    {"subsample_ds", mc.subsample_ds},
                    {"subsample_seed", mc.subsample_seed},
                    {"restarts", mc.direct.restarts},
                    {"gmm_seed", mc.direct.seed}};
    }
};

json eval_report_json(const EvalReport& r) {
    return json{{"auc", r.auc_pct},     {"threshold", r.threshold}, {"sn", r.sn_pct},
                {"sp", r.sp_pct},       {"n_ss", r.n_ss},           {"n_ds", r.n_ds},
                {"method", r.method},   {"feature_count", r.feature_count},
                {"dataset", r.dataset}};
}

void print_report_table(const EvalReport& cal, const EvalReport& test) {
    std::printf("method: %s\n", cal.method.c_str());
    std::printf("%-12s %9s %8s %10s %8s %8s %9s %11s\n", "dataset", "features", "AUC",
                "threshold", "Sn", "Sp", "n_ss", "n_ds");
    for (const EvalReport* r : {&cal, &test})
        std::printf("%-12s %9zu %8.2f %10.4f %8.2f %8.2f %9zu %11zu\n", r->dataset.c_str(),
                    r->feature_count, r->auc_pct, r->threshold, r->sn_pct, r->sp_pct, r->n_ss,
                    r->n_ds);
}

struct SynthFlags {
    std::string out;
    std::size_t subjects = 0;
    std::size_t replicates = 0;
    std::string profile;
    std::size_t features = 0;
    std::size_t informative = 0;
    double between_sd = 1.0;
    double within_sd = 0.1;
    double sparsity = 0.0;
    double gender_fraction = 0.5;
    double strength_decay = 0.0;
    std::uint64_t seed = 0;
};

void run_synth(const SynthFlags& flags) {
    PanelConfig cfg;
    if (!flags.profile.empty()) {
        cfg.replicate_profile = parse_profile(flags.profile);
        std::size_t total = 0;
        for (const auto& [reps, count] : cfg.replicate_profile) total += count;
        if (flags.subjects != 0 && flags.subjects != total)
            throw UsageError("--subjects disagrees with the --profile total of " +
                             std::to_string(total));
        cfg.n_subjects = total;
    } else {
        if (flags.subjects == 0) throw UsageError("need --subjects (with --replicates) or --profile");
        if (flags.replicates == 0)
            throw UsageError("need --replicates R or --profile when --subjects is given");
        cfg.n_subjects = flags.subjects;
        cfg.replicate_profile = {{flags.replicates, flags.subjects}};
    }
    cfg.n_features = flags.features;
    cfg.n_informative = flags.informative;
    cfg.between_subject_sd = flags.between_sd;
    cfg.within_subject_sd = flags.within_sd;
    cfg.sparsity = flags.sparsity;
    cfg.gender_fraction = flags.gender_fraction;
    cfg.informative_strength_decay = flags.strength_decay;
    cfg.seed = flags.seed;

    RunContext run;
    run.command = "synth";
    run.config = json::parse(panel_config_json(cfg));
    run.seed = cfg.seed;

    const TraceMatrix panel = generate_panel(cfg);
    std::vector<std::string> comments = run.csv_comments(flags.out);
    comments.insert(comments.begin(), "#panel_config: " + panel_config_json(cfg));
    emit_csv(panel, flags.out, comments);
    run.write_manifest(flags.out);
    std::printf("wrote %zu traces x %zu features (%zu subjects) to %s\n", panel.size(),
                panel.n_features(), panel.subjects().size(), flags.out.c_str());
}

struct TransformFlags {
    std::string in;
    std::string out;
    double threshold = 0.0;
    CsvSchema schema;
};

void run_transform(const std::string& command, const TransformFlags& flags) {
    RunContext run;
    run.command = command;
    run.add_input(flags.in);
    run.config = {{"in", flags.in}, {"out", flags.out}};

    TraceMatrix m = ingest_csv(flags.in, flags.schema);
    if (command == "normalize") {
        m = normalize_log(m);
    } else if (command == "dichotomize") {
        run.config["threshold"] = flags.threshold;
        m = dichotomize(m, flags.threshold);
    }
    emit_csv(m, flags.out, run.csv_comments(flags.out));
    run.write_manifest(flags.out);
    std::printf("wrote %zu traces x %zu features (%s) to %s\n", m.size(), m.n_features(),
                mode_name(m.mode()), flags.out.c_str());
}

struct SplitFlags {
    std::string in;
    std::string cal;
    std::string test;
    double fraction = 0.5;
    bool stratify = false;
    std::uint64_t seed = 0;
};

void run_split(const SplitFlags& flags) {
    RunContext run;
    run.command = "split";
    run.add_input(flags.in);
    run.seed = flags.seed;
    run.config = {{"in", flags.in},
                  {"cal", flags.cal},
                  {"test", flags.test},
                  {"fraction", flags.fraction},
                  {"stratify_gender", flags.stratify}};

    const TraceMatrix m = ingest_csv(flags.in);
    SplitConfig cfg;
    cfg.calibration_fraction = flags.fraction;
    cfg.stratify_gender = flags.stratify;
    cfg.seed = flags.seed;
    const auto [cal, test] = split_calibration_test(m, cfg);
    emit_csv(cal, flags.cal, run.csv_comments(flags.cal));
    emit_csv(test, flags.test, run.csv_comments(flags.cal));
    run.write_manifest(flags.cal);
    std::printf("calibration: %zu traces (%zu subjects) -> %s\n", cal.size(),
                cal.subjects().size(), flags.cal.c_str());
    std::printf("test:        %zu traces (%zu subjects) -> %s\n", test.size(),
                test.subjects().size(), flags.test.c_str());
}

struct PairsFlags {
    std::string in;
    std::string out;
    std::string distance;
    std::string features;
    int threads = 0;
};

void run_pairs(const PairsFlags& flags) {
    RunContext run;
    run.command = "pairs";
    run.add_input(flags.in);
    run.config = {{"in", flags.in}, {"out", flags.out}};
    if (!flags.distance.empty()) run.config["distance"] = flags.distance;

    const TraceMatrix m = ingest_csv(flags.in);
    const PairSet pairs = enumerate_pairs(m);

    DistanceSet distances;
    const bool with_distance = !flags.distance.empty();
    if (with_distance) {
        DistanceOptions opt;
        if (!flags.features.empty())
            opt.feature_subset = parse_size_list(flags.features, "--features");
        opt.threads = flags.threads;
        distances = compute_distances(m, pairs, distance_kind_from_name(flags.distance), opt);
    }

    std::string body;
    for (const auto& c : run.csv_comments(flags.out)) {
        body += c;
        body += "\n";
    }
    body += "i,j,subject_i,subject_j,label";
    if (with_distance) body += ",distance";
    body += "\n";
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        const auto& pr = pairs.pairs[p];
        body += std::to_string(pr.i) + "," + std::to_string(pr.j) + "," +
                m.info(pr.i).subject_id + "," + m.info(pr.j).subject_id + "," +
                (pr.label == PairLabel::same_source ? "same_source" : "different_source");
        if (with_distance) body += "," + shortest(distances.scalar[p]);
        body += "\n";
    }
    write_text_atomic(flags.out, body);
    run.write_manifest(flags.out);
    std::printf("wrote %zu pairs (%zu same-source, %zu different-source) to %s\n",
                pairs.pairs.size(), pairs.n_same, pairs.n_diff, flags.out.c_str());
}

struct FitFlags {
    std::string in;
    std::string out;
    MethodFlags method;
};

void run_fit(const FitFlags& flags) {
    const MethodConfig mc = flags.method.build();

    RunContext run;
    run.command = "fit";
    run.add_input(flags.in);
    run.config = flags.method.config_json(mc);
    run.config["in"] = flags.in;

    const TraceMatrix cal = ingest_csv(flags.in);
    const FittedMethod fitted = fit_method(cal, mc);

    json j;
    if (mc.kind == MethodKind::direct) {
        j = json::parse(model_json(fitted.direct));
        std::printf("direct model: ss means (%.6g, %.6g), ds means (%.6g, %.6g)\n",
                    fitted.direct.model_ss.means[0], fitted.direct.model_ss.means[1],
                    fitted.direct.model_ds.means[0], fitted.direct.model_ds.means[1]);
    } else {
        j = json::parse(model_json(fitted.logistic));
        // compare needs these to rebuild the distance; the loader ignores them
        j["distance_kind"] = distance_kind_name(mc.distance);
        j["feature_subset"] = mc.feature_subset;
        std::printf("logistic model: %zu coefficient(s), b=%.6g, f_ss=%.6g, %d iteration(s)%s\n",
                    fitted.logistic.a.size(), fitted.logistic.b, fitted.logistic.f_ss,
                    fitted.logistic.iterations, fitted.logistic.converged ? "" : ", NOT converged");
        if (!fitted.logistic.converged)
            std::fprintf(stderr, "warning: fit did not converge: %s\n",
                         fitted.logistic_report.note.c_str());
    }
    run.stamp(j, flags.out);
    write_text_atomic(flags.out, j.dump(2) + "\n");
    run.write_manifest(flags.out);
    std::printf("wrote model to %s\n", flags.out.c_str());
}

struct SelectFlags {
    std::string in;
    std::string out;
    std::string ranking_out;
    std::string grid;
    int folds = 3;
    std::uint64_t seed = 0;
    MethodFlags method;
};

void run_select(const SelectFlags& flags) {
    const MethodConfig mc = flags.method.build();
    if (!mc.feature_subset.empty())
        throw UsageError("select chooses the feature count itself; drop --features/--ranking");

    RunContext run;
    run.command = "select";
    run.add_input(flags.in);
    run.seed = flags.seed;
    run.config = flags.method.config_json(mc);
    run.config["in"] = flags.in;
    run.config["folds"] = flags.folds;
    if (!flags.grid.empty()) run.config["grid"] = flags.grid;

    const TraceMatrix cal = ingest_csv(flags.in);
    const std::vector<std::size_t> grid = flags.grid.empty()
                                              ? default_count_grid(cal.n_features())
                                              : parse_size_list(flags.grid, "--grid");
    const SelectionResult sel = select_count_cv(cal, mc, grid, flags.folds, flags.seed);

    json by_count = json::object();
    for (const auto& [count, stats] : sel.cv_auc_by_count)
        by_count[std::to_string(count)] = {{"mean_auc", stats.mean_auc},
                                           {"sd_auc", stats.sd_auc},
                                           {"fold_auc", stats.fold_auc}};
    json j{{"schema", 1},
           {"method", method_kind_name(mc.kind)},
           {"distance", distance_kind_name(mc.distance)},
           {"folds", flags.folds},
           {"seed", flags.seed},
           {"grid", sel.grid},
           {"best_count", sel.best_count},
           {"test_kind", feature_test_kind_name(sel.full_ranking.test_kind)},
           {"cv_auc_by_count", by_count}};
    run.stamp(j, flags.out);
    write_text_atomic(flags.out, j.dump(2) + "\n");

    if (!flags.ranking_out.empty()) {
        std::string body;
        for (const auto& c : run.csv_comments(flags.out)) {
            body += c;
            body += "\n";
        }
        body += "rank,feature_index,feature_name,p_value\n";
        const auto& names = cal.feature_names();
        for (std::size_t r = 0; r < sel.full_ranking.order.size(); ++r) {
            const std::size_t k = sel.full_ranking.order[r];
            const std::string name = k < names.size() ? names[k] : "f_" + std::to_string(k + 1);
            body += std::to_string(r + 1) + "," + std::to_string(k) + "," + name + "," +
                    shortest(sel.full_ranking.p_values[k]) + "\n";
        }
        write_text_atomic(flags.ranking_out, body);
    }
    run.write_manifest(flags.out);

    std::printf("best feature count: %zu (%s test)\n", sel.best_count,
                feature_test_kind_name(sel.full_ranking.test_kind));
    for (const auto& [count, stats] : sel.cv_auc_by_count) {
        if (std::isfinite(stats.mean_auc))
            std::printf("  count %5zu: CV AUC %.4f (sd %.4f)\n", count, stats.mean_auc,
                        stats.sd_auc);
        else
            std::printf("  count %5zu: no valid fit on every fold\n", count);
    }
}

struct EvaluateFlags {
    std::string cal;
    std::string test;
    std::string out;
    std::string roc_out;
    MethodFlags method;
};

void write_roc_csv(const RocCurve& roc, const std::string& path,
                   const std::vector<std::string>& comments) {
    std::string body;
    for (const auto& c : comments) {
        body += c;
        body += "\n";
    }
    body += "threshold,sensitivity,specificity\n";
    for (const auto& p : roc.points)
        body += shortest(p.threshold) + "," + shortest(p.sensitivity) + "," +
                shortest(p.specificity) + "\n";
    write_text_atomic(path, body);
}

void run_evaluate(const EvaluateFlags& flags) {
    const MethodConfig mc = flags.method.build();

    RunContext run;
    run.command = "evaluate";
    run.add_input(flags.cal);
    run.add_input(flags.test);
    run.config = flags.method.config_json(mc);
    run.config["cal"] = flags.cal;
    run.config["test"] = flags.test;

    const TraceMatrix cal = ingest_csv(flags.cal);
    const TraceMatrix test = ingest_csv(flags.test);
    const auto [cal_report, test_report] = evaluate_method(cal, test, mc);

    json j{{"schema", 1},
           {"prior", mc.prior_ss},
           {"calibration", eval_report_json(cal_report)},
           {"test", eval_report_json(test_report)}};
    run.stamp(j, flags.out);
    write_text_atomic(flags.out, j.dump(2) + "\n");

    if (!flags.roc_out.empty()) {
        // Re-derive the two ROC curves for plotting.
        const FittedMethod fitted = fit_method(cal, mc);
        const std::array<std::pair<const TraceMatrix*, const char*>, 2> sides{
            {{&cal, "cal"}, {&test, "test"}}};
        for (const auto& [side, tag] : sides) {
            const PairSet pairs = enumerate_pairs(*side);
            const auto scores = score_pairs(fitted, *side, pairs);
            const auto [ss, ds] = split_scores(scores, pairs);
            write_roc_csv(roc_auc(ss, ds), flags.roc_out + "." + std::string(tag) + ".csv",
                          run.csv_comments(flags.out));
        }
    }
    run.write_manifest(flags.out);
    print_report_table(cal_report, test_report);
}

struct CompareFlags {
    std::string trace_a;
    std::string trace_b;
    std::string model;
    double prior = 0.0;
    std::string distance;
    std::string features;
};

TraceMatrix load_single_trace(const std::string& path) {
    const TraceMatrix m = ingest_csv(path);
    if (m.size() != 1)
        throw Error(ErrorCode::config_error,
                    "'" + path + "' holds " + std::to_string(m.size()) +
                        " traces; compare expects exactly one per file");
    return m;
}

std::vector<double> gather_subset(std::span<const double> row,
                                  const std::vector<std::size_t>& subset) {
    if (subset.empty()) return {row.begin(), row.end()};
    std::vector<double> out;
    out.reserve(subset.size());
    for (const std::size_t k : subset) {
        if (k >= row.size())
            throw Error(ErrorCode::config_error,
                        "feature index " + std::to_string(k) + " out of range");
        out.push_back(row[k]);
    }
    return out;
}

void run_compare(const CompareFlags& flags) {
    const LoadedModel loaded = load_model(flags.model);

    // Optional hints written by `fit`; flags override them.
    json raw;
    {
        std::ifstream in(flags.model, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        raw = json::parse(buf.str());
    }
    std::string distance_name = flags.distance;
    std::vector<std::size_t> subset;
    if (!flags.features.empty()) {
        subset = parse_size_list(flags.features, "--features");
    } else if (raw.contains("feature_subset")) {
        subset = raw.at("feature_subset").get<std::vector<std::size_t>>();
    }
    if (distance_name.empty() && raw.contains("distance_kind"))
        distance_name = raw.at("distance_kind").get<std::string>();

    const TraceMatrix a = load_single_trace(flags.trace_a);
    const TraceMatrix b = load_single_trace(flags.trace_b);
    if (a.n_features() != b.n_features())
        throw Error(ErrorCode::dimension_mismatch, "trace files have different feature counts");
    if (a.mode() != b.mode())
        throw Error(ErrorCode::config_error, "trace files have different modes");

    const std::vector<double> xa = gather_subset(a.row(0), subset);
    const std::vector<double> xb = gather_subset(b.row(0), subset);

    LrValue lr;
    double posterior = 0.0;
    if (loaded.flavor == ModelFlavor::direct) {
        const DistanceKind kind =
            distance_name.empty() ? loaded.direct.distance_kind
                                  : distance_kind_from_name(distance_name);
        double d = 0.0;
        switch (kind) {
            case DistanceKind::euclidean: d = euclidean(xa, xb); break;
            case DistanceKind::pearson: d = pearson_distance(xa, xb); break;
            case DistanceKind::spearman: d = spearman_distance(xa, xb); break;
            case DistanceKind::vectorial:
                throw Error(ErrorCode::config_error,
                            "the direct method scores scalar distances only");
        }
        lr = direct_lr(loaded.direct, d);
        posterior = direct_posterior(loaded.direct, d, flags.prior);
    } else if (loaded.logistic.mode == LogisticMode::vectorial) {
        const std::vector<double> d = vectorial_distance(xa, xb);
        lr = indirect_lr(loaded.logistic, d);
        posterior = indirect_posterior(loaded.logistic, d, flags.prior);
    } else {
        const DistanceKind kind =
            distance_kind_from_name(distance_name.empty() ? "spearman" : distance_name);
        double d = 0.0;
        switch (kind) {
            case DistanceKind::euclidean: d = euclidean(xa, xb); break;
            case DistanceKind::pearson: d = pearson_distance(xa, xb); break;
            case DistanceKind::spearman: d = spearman_distance(xa, xb); break;
            case DistanceKind::vectorial:
                throw Error(ErrorCode::config_error,
                            "a scalar logistic model scores scalar distances only");
        }
        const std::vector<double> dv{d};
        lr = indirect_lr(loaded.logistic, dv);
        posterior = indirect_posterior(loaded.logistic, dv, flags.prior);
    }

    std::printf("LR=%.6f\n", lr.value);
    std::printf("log10_LR=%.6f\n", lr.log_value / std::log(10.0));
    std::printf("prior=%.6f\n", flags.prior);
    std::printf("posterior=%.6f\n", posterior);
    if (lr.saturated_low) std::printf("note: LR clamped at the 1e-300 floor\n");
    if (lr.saturated_high) std::printf("note: LR clamped at the 1e300 ceiling\n");
}

struct RepeatFlags {
    std::string in;
    std::string out;
};

void run_repeatability(const RepeatFlags& flags) {
    RunContext run;
    run.command = "repeatability";
    run.add_input(flags.in);
    run.config = {{"in", flags.in}};

    const TraceMatrix m = ingest_csv(flags.in);
    const RepeatabilityReport report = repeatability(m);
    std::printf("RSD%% median [quartiles]: %s\n", report.format().c_str());

    if (!flags.out.empty()) {
        json j{{"schema", 1},
               {"median_rsd", report.median_rsd},
               {"iqi_low", report.iqi_low},
               {"iqi_high", report.iqi_high},
               {"per_feature_rsd", report.per_feature_rsd}};
        run.stamp(j, flags.out);
        write_text_atomic(flags.out, j.dump(2) + "\n");
        run.write_manifest(flags.out);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distance-based likelihood ratios for forensic source comparison"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    auto synth_flags = std::make_shared<SynthFlags>();
    auto* synth = app.add_subcommand("synth", "generate a synthetic trace panel");
    synth->add_option("--out", synth_flags->out, "output CSV")->required();
    synth->add_option("--subjects", synth_flags->subjects, "number of subjects");
    synth->add_option("--replicates", synth_flags->replicates, "replicates per subject");
    synth->add_option("--profile", synth_flags->profile,
                      "replicate profile REPLICATES:SUBJECTS[,...], e.g. 1:44,2:77");
    synth->add_option("--features", synth_flags->features, "feature count")->required();
    synth->add_option("--informative", synth_flags->informative, "informative feature count");
    synth->add_option("--between-sd", synth_flags->between_sd, "between-subject log-scale sd");
    synth->add_option("--within-sd", synth_flags->within_sd, "within-subject log-scale sd");
    synth->add_option("--sparsity", synth_flags->sparsity, "probability a compound is absent");
    synth->add_option("--gender-fraction", synth_flags->gender_fraction,
                      "probability a subject is male");
    synth->add_option("--strength-decay", synth_flags->strength_decay,
                      "linear fade of informative strengths in [0, 1]");
    synth->add_option("--seed", synth_flags->seed, "generation seed");
    synth->callback([synth_flags] { run_synth(*synth_flags); });

    const auto add_transform = [&](const std::string& name, const std::string& help) {
        auto flags = std::make_shared<TransformFlags>();
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--in", flags->in, "input CSV")->required();
        cmd->add_option("--out", flags->out, "output CSV")->required();
        if (name == "dichotomize")
            cmd->add_option("--threshold", flags->threshold, "presence threshold on raw areas");
        if (name == "ingest") {
            cmd->add_option("--subject-column", flags->schema.subject_column, "subject id column");
            cmd->add_option("--replicate-column", flags->schema.replicate_column,
                            "replicate id column");
            cmd->add_option("--gender-column", flags->schema.gender_column, "gender column");
            cmd->add_option("--age-column", flags->schema.age_column, "age column");
        }
        cmd->callback([flags, name] { run_transform(name, *flags); });
    };
    add_transform("ingest", "validate a CSV and rewrite it in canonical form");
    add_transform("normalize", "log-transform and scale each trace to unit sum");
    add_transform("dichotomize", "replace areas by presence/absence");

    auto split_flags = std::make_shared<SplitFlags>();
    auto* split = app.add_subcommand("split", "subject-disjoint calibration/test split");
    split->add_option("--in", split_flags->in, "input CSV")->required();
    split->add_option("--cal", split_flags->cal, "calibration output CSV")->required();
    split->add_option("--test", split_flags->test, "test output CSV")->required();
    split->add_option("--fraction", split_flags->fraction, "calibration subject fraction");
    split->add_flag("--stratify-gender", split_flags->stratify, "balance the split per gender");
    split->add_option("--seed", split_flags->seed, "shuffle seed");
    split->callback([split_flags] { run_split(*split_flags); });

    auto pairs_flags = std::make_shared<PairsFlags>();
    auto* pairs = app.add_subcommand("pairs", "enumerate labeled trace pairs");
    pairs->add_option("--in", pairs_flags->in, "input CSV")->required();
    pairs->add_option("--out", pairs_flags->out, "output CSV")->required();
    pairs->add_option("--distance", pairs_flags->distance,
                      "also emit this scalar distance per pair")
        ->check(CLI::IsMember({"euclidean", "pearson", "spearman"}));
    pairs->add_option("--features", pairs_flags->features, "feature subset for the distance");
    pairs->add_option("--threads", pairs_flags->threads, "worker threads (0 = hardware)");
    pairs->callback([pairs_flags] { run_pairs(*pairs_flags); });

    auto fit_flags = std::make_shared<FitFlags>();
    auto* fit = app.add_subcommand("fit", "fit a likelihood-ratio model on calibration traces");
    fit->add_option("--in", fit_flags->in, "calibration CSV")->required();
    fit->add_option("--out", fit_flags->out, "model JSON")->required();
    fit_flags->method.register_common(fit, true);
    fit->callback([fit_flags] { run_fit(*fit_flags); });

    auto select_flags = std::make_shared<SelectFlags>();
    auto* select = app.add_subcommand("select", "pick the feature count by grouped k-fold CV");
    select->add_option("--in", select_flags->in, "calibration CSV")->required();
    select->add_option("--out", select_flags->out, "selection JSON")->required();
    select->add_option("--ranking-out", select_flags->ranking_out,
                       "write the full-set feature ranking CSV here");
    select->add_option("--grid", select_flags->grid, "candidate counts, e.g. 1,2,5,10");
    select->add_option("--folds", select_flags->folds, "fold count")->check(CLI::PositiveNumber);
    select->add_option("--seed", select_flags->seed, "fold shuffle seed");
    select_flags->method.register_common(select, false);
    select->callback([select_flags] { run_select(*select_flags); });

    auto eval_flags = std::make_shared<EvaluateFlags>();
    auto* evaluate = app.add_subcommand("evaluate", "fit on calibration, report AUC/Sn/Sp on both");
    evaluate->add_option("--cal", eval_flags->cal, "calibration CSV")->required();
    evaluate->add_option("--test", eval_flags->test, "test CSV")->required();
    evaluate->add_option("--out", eval_flags->out, "report JSON")->required();
    evaluate->add_option("--roc-out", eval_flags->roc_out,
                         "prefix for <prefix>.cal.csv / <prefix>.test.csv ROC points");
    eval_flags->method.register_common(evaluate, true);
    evaluate->add_option("--prior", eval_flags->method.prior,
                         "prior same-source probability for the posterior scores");
    evaluate->callback([eval_flags] { run_evaluate(*eval_flags); });

    auto compare_flags = std::make_shared<CompareFlags>();
    auto* compare = app.add_subcommand("compare", "LR and posterior for one trace pair");
    compare->add_option("--trace-a", compare_flags->trace_a, "CSV with exactly one trace")
        ->required();
    compare->add_option("--trace-b", compare_flags->trace_b, "CSV with exactly one trace")
        ->required();
    compare->add_option("--model", compare_flags->model, "model JSON from `fit`")->required();
    compare->add_option("--prior", compare_flags->prior,
                        "prior same-source probability (required: forensic "
                        "conclusions must state their prior)")
        ->required()
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
    compare->add_option("--distance", compare_flags->distance,
                        "override the distance recorded in the model")
        ->check(CLI::IsMember({"euclidean", "pearson", "spearman"}));
    compare->add_option("--features", compare_flags->features,
                        "override the feature subset recorded in the model");
    compare->callback([compare_flags] { run_compare(*compare_flags); });

    auto repeat_flags = std::make_shared<RepeatFlags>();
    auto* repeat = app.add_subcommand("repeatability", "within-subject RSD% summary");
    repeat->add_option("--in", repeat_flags->in, "input CSV")->required();
    repeat->add_option("--out", repeat_flags->out, "optional JSON report");
    repeat->callback([repeat_flags] { run_repeatability(*repeat_flags); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
