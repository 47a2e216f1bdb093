#include "sinc/cli.hpp"

#include "sinc/io.hpp"
#include "sinc/metrics.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace sinc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s)
{
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    return s.substr(begin, s.find_last_not_of(" \t\r") - begin + 1);
}

const std::string& lookup(const Settings& s, const std::string& key)
{
    const auto it = s.find(key);
    if (it == s.end()) {
        throw Error(ErrorKind::InvalidArgument, "missing setting '" + key + "'");
    }
    return it->second;
}

double to_double(const Settings& s, const std::string& key)
{
    const std::string& text = lookup(s, key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorKind::InvalidArgument,
                    "setting '" + key + "' expects a number, got '" + text + "'");
    }
    return v;
}

long to_long(const Settings& s, const std::string& key)
{
    const std::string& text = lookup(s, key);
    long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorKind::InvalidArgument,
                    "setting '" + key + "' expects an integer, got '" + text + "'");
    }
    return v;
}

bool to_bool(const Settings& s, const std::string& key)
{
    const std::string& text = lookup(s, key);
    if (text == "true" || text == "1" || text == "yes" || text == "on") {
        return true;
    }
    if (text == "false" || text == "0" || text == "no" || text == "off") {
        return false;
    }
    throw Error(ErrorKind::InvalidArgument,
                "setting '" + key + "' expects true or false, got '" + text + "'");
}

std::string timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json settings_json(const Settings& s)
{
    json j = json::object();
    for (const auto& [k, v] : s) {
        j[k] = v;
    }
    return j;
}

json fit_summary(const FitResult& r)
{
    long coefficients = 0;
    for (Index j = 0; j < r.selected_coefficients.cols(); ++j) {
        for (Index k = 0; k < r.selected_coefficients.rows(); ++k) {
            coefficients += r.selected_coefficients(k, j) ? 1 : 0;
        }
    }
    return json{
        {"iterations", r.iterations},
        {"converged", r.converged},
        {"final_elbo", r.elbo_trace.back()},
        {"edge_sparsity", r.edge_sparsity()},
        {"selected_coefficients", coefficients},
        {"pi", r.network.pi},
        {"tau", r.network.tau},
        {"diagnostics",
         {{"line_search_failures", r.diagnostics.line_search_failures},
          {"clamped_rows", r.diagnostics.clamped_rows},
          {"vi_nonconverged_columns", r.diagnostics.vi_nonconverged_columns},
          {"omega_nonconverged_loops", r.diagnostics.omega_nonconverged_loops},
          {"tau_fallbacks", r.diagnostics.tau_fallbacks}}},
    };
}

json inputs_json(const RunManifest& m)
{
    json j = json::object();
    if (!m.counts.empty()) j["counts"] = m.counts;
    if (!m.covariates.empty()) j["covariates"] = m.covariates;
    if (!m.truth.empty()) j["truth"] = m.truth;
    if (!m.estimate.empty()) j["estimate"] = m.estimate;
    if (!m.config.empty()) j["config"] = m.config;
    return j;
}

std::string record(const RunManifest& m, const Settings& s, json result)
{
    json j{{"command", m.command},
           {"inputs", inputs_json(m)},
           {"settings", settings_json(s)},
           {"result", std::move(result)}};
    return j.dump(2) + "\n";
}

void require(const std::string& value, const char* flag, const std::string& command)
{
    if (value.empty()) {
        throw Error(ErrorKind::InvalidArgument, command + " needs " + flag);
    }
}

struct Inputs {
    CountMatrix X;
    CovariateMatrix M;
};

Inputs load_inputs(const RunManifest& m)
{
    require(m.counts, "--counts", m.command);
    Inputs in;
    in.X = load_counts(m.counts);
    in.M = m.covariates.empty() ? CovariateMatrix::empty(in.X.rows()) : load_covariates(m.covariates);
    return in;
}

std::string grid_dir_name(std::size_t k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "nu0_%02zu", k + 1);
    return buf;
}

std::optional<BoolMatrix> optional_truth(const RunManifest& m)
{
    if (m.truth.empty()) {
        return std::nullopt;
    }
    return load_boolean(fs::path(m.truth) / "adjacency_true.tsv");
}

int run_simulate(const RunManifest& m, const Settings& s, std::ostream& log)
{
    require(m.out, "--out", m.command);
    const GraphSpec spec = graph_spec_from(s);
    PrecisionOptions opts;
    opts.v = to_double(s, "v");
    opts.u = to_double(s, "u");
    opts.random_sign = to_bool(s, "random_sign");
    const auto seed = static_cast<std::uint64_t>(to_long(s, "seed"));
    const GroundTruth truth = generate_dataset(spec, to_long(s, "n"), to_long(s, "q"), seed, opts);
    write_ground_truth(truth, m.out);
    long edges = 0;
    for (Index i = 0; i < truth.adjacency.rows(); ++i) {
        for (Index j = i + 1; j < truth.adjacency.cols(); ++j) {
            edges += truth.adjacency(i, j) ? 1 : 0;
        }
    }
    write_text(fs::path(m.out) / "run.json",
               record(m, s, json{{"edges", edges}, {"p", spec.p}, {"n", truth.counts.rows()}}));
    log << "simulated " << to_string(spec.kind) << " graph with " << edges << " edges into "
        << m.out << "\n";
    return 0;
}

int run_fit(const RunManifest& m, const Settings& s, std::ostream& log)
{
    require(m.out, "--out", m.command);
    const Inputs in = load_inputs(m);
    const FitResult r = fit_once(in.X, in.M, hyperparameters_from(s), fit_config_from(s));
    write_outputs(r, in.X, in.M, m.out, record(m, s, fit_summary(r)));
    log << "fit finished after " << r.iterations << " iterations"
        << (r.converged ? "" : " (not converged)") << "; edge sparsity " << r.edge_sparsity()
        << "\n";
    return 0;
}

int run_grid(const RunManifest& m, const Settings& s, std::ostream& log)
{
    require(m.out, "--out", m.command);
    const Inputs in = load_inputs(m);
    const std::optional<BoolMatrix> truth = optional_truth(m);
    const GridResult g =
        fit_grid(in.X, in.M, hyperparameters_from(s), fit_config_from(s), nu0_grid_from(s),
                 to_double(s, "sparsity_target"), truth ? &*truth : nullptr);

    Matrix summary(static_cast<Index>(g.fits.size()), truth ? 9 : 7);
    std::vector<std::string> names{"index", "nu0", "sparsity", "elbo", "iterations", "converged",
                                   "selected"};
    if (truth) {
        names.push_back("fpr");
        names.push_back("tpr");
    }
    for (std::size_t k = 0; k < g.fits.size(); ++k) {
        const GridPoint& p = g.fits[k];
        Settings point_settings = s;
        point_settings["nu0"] = format_double(p.nu0);
        write_outputs(p.fit, in.X, in.M, fs::path(m.out) / grid_dir_name(k),
                      record(m, point_settings, fit_summary(p.fit)));
        const auto row = static_cast<Index>(k);
        summary(row, 0) = static_cast<double>(k + 1);
        summary(row, 1) = p.nu0;
        summary(row, 2) = p.sparsity;
        summary(row, 3) = p.elbo;
        summary(row, 4) = p.fit.iterations;
        summary(row, 5) = p.fit.converged ? 1.0 : 0.0;
        summary(row, 6) = k == g.selected_index ? 1.0 : 0.0;
        if (truth) {
            summary(row, 7) = p.roc->fpr;
            summary(row, 8) = p.roc->tpr;
        }
    }
    write_matrix(fs::path(m.out) / "grid_summary.tsv", summary, names);

    const GridPoint& sel = g.selected();
    Settings selected_settings = s;
    selected_settings["nu0"] = format_double(sel.nu0);
    write_outputs(sel.fit, in.X, in.M, fs::path(m.out) / "selected",
                  record(m, selected_settings, fit_summary(sel.fit)));

    json result{{"selected_index", g.selected_index + 1},
                {"selected_nu0", sel.nu0},
                {"selected_sparsity", sel.sparsity}};
    if (const auto auc = g.auc()) {
        result["edge_auc"] = *auc;
    }
    write_text(fs::path(m.out) / "run.json", record(m, s, result));
    log << "grid of " << g.fits.size() << " fits; selected nu0 = " << sel.nu0
        << " with edge sparsity " << sel.sparsity << "\n";
    return 0;
}

int run_evaluate(const RunManifest& m, const Settings& s, std::ostream& log)
{
    require(m.out, "--out", m.command);
    require(m.truth, "--truth", m.command);
    require(m.estimate, "--estimate", m.command);
    const fs::path truth_dir(m.truth);
    fs::path estimate_dir(m.estimate);

    // A grid directory is scored through its selected model, plus the ROC over its points.
    std::optional<double> auc;
    const BoolMatrix truth_adj = load_boolean(truth_dir / "adjacency_true.tsv");
    if (fs::exists(estimate_dir / "grid_summary.tsv")) {
        const LabeledMatrix summary =
            load_matrix(estimate_dir / "grid_summary.tsv", MatrixKind::Reals);
        std::vector<RocPoint> points;
        for (Index k = 0; k < summary.values.rows(); ++k) {
            const BoolMatrix est = load_boolean(
                estimate_dir / grid_dir_name(static_cast<std::size_t>(k)) / "adjacency.tsv");
            const Scores sc = scores(edge_confusion(est, truth_adj));
            points.push_back({sc.fpr, sc.tpr});
        }
        auc = roc_auc(points);
        estimate_dir /= "selected";
    }

    std::vector<std::string> rows;
    std::vector<Scores> all_scores;
    std::vector<ConfusionCounts> all_counts;
    const ConfusionCounts edges =
        edge_confusion(load_boolean(estimate_dir / "adjacency.tsv"), truth_adj);
    rows.push_back("edges");
    all_counts.push_back(edges);
    if (fs::exists(estimate_dir / "phi.tsv") && fs::exists(truth_dir / "b_true.tsv")) {
        const LabeledMatrix phi = load_matrix(estimate_dir / "phi.tsv", MatrixKind::Reals);
        const BoolMatrix b_true = load_boolean(truth_dir / "b_true.tsv");
        rows.push_back("coefficients");
        all_counts.push_back(support_confusion((phi.values.array() > 0.5).matrix(), b_true));
    }

    Matrix table(static_cast<Index>(rows.size()), 9);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const ConfusionCounts& c = all_counts[r];
        const Scores sc = scores(c);
        const auto i = static_cast<Index>(r);
        table.row(i) << c.tp, c.fp, c.fn, c.tn, sc.tpr, sc.fpr, sc.f1, sc.mcc,
            (r == 0 && auc) ? *auc : NAN;
    }
    std::error_code ec;
    fs::create_directories(m.out, ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot create " + m.out + ": " + ec.message());
    }
    write_matrix(fs::path(m.out) / "metrics.tsv", table,
                 {"tp", "fp", "fn", "tn", "tpr", "fpr", "f1", "mcc", "auc"}, rows);
    write_text(fs::path(m.out) / "run.json", record(m, s, json{{"scored", rows}}));
    log << "edge MCC " << scores(edges).mcc << (auc ? ", AUC " + format_double(*auc) : "") << "\n";
    return 0;
}

}  // namespace

const Settings& default_settings()
{
    static const Settings defaults = [] {
        const Hyperparameters hp;
        const FitConfig cfg;
        const GraphSpec graph;
        return Settings{
            {"nu0", format_double(hp.nu0)},
            {"nu1", format_double(hp.nu1)},
            {"lambda", format_double(hp.lambda)},
            {"nu_b", format_double(hp.nuB)},
            {"a_gamma", format_double(hp.a_gamma)},
            {"b_gamma", format_double(hp.b_gamma)},
            {"a_pi", format_double(hp.a_pi)},
            {"b_pi", format_double(hp.b_pi)},
            {"a_tau", format_double(hp.a_tau)},
            {"b_tau", format_double(hp.b_tau)},
            {"learn_tau", "false"},
            {"outer_tol", format_double(cfg.outer_tol)},
            {"inner_tol", format_double(cfg.inner_tol)},
            {"max_outer_iters", std::to_string(cfg.max_outer_iters)},
            {"max_inner_iters", std::to_string(cfg.max_inner_iters)},
            {"lbfgs_memory", std::to_string(cfg.lbfgs.memory)},
            {"lbfgs_gradient_tol", format_double(cfg.lbfgs.gradient_tol)},
            {"lbfgs_max_evaluations", std::to_string(cfg.lbfgs.max_evaluations)},
            {"residual_variance", "marginal"},
            {"constrain_b_zero", "false"},
            {"constrain_omega_identity", "false"},
            {"threads", "1"},
            {"seed", "0"},
            {"nu0_grid", ""},
            {"sparsity_target", format_double(kDefaultSparsityTarget)},
            {"graph", to_string(graph.kind)},
            {"p", std::to_string(graph.p)},
            {"n", "300"},
            {"q", "50"},
            {"bandwidth", std::to_string(graph.bandwidth)},
            {"n_hubs", std::to_string(graph.n_hubs)},
            {"edge_prob", format_double(graph.edge_prob)},
            {"within_cluster_prob", format_double(graph.within_cluster_prob)},
            {"n_clusters", std::to_string(graph.n_clusters)},
            {"v", "1"},
            {"u", "0.0001"},
            {"random_sign", "false"},
        };
    }();
    return defaults;
}

Settings parse_config(const std::string& text, const std::string& source)
{
    Settings out;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::InvalidArgument,
                        source + ":" + std::to_string(number) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (default_settings().count(key) == 0) {
            throw Error(ErrorKind::InvalidArgument,
                        source + ":" + std::to_string(number) + ": unknown setting '" + key + "'");
        }
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

Settings resolve_settings(const RunManifest& manifest)
{
    Settings s = default_settings();
    if (!manifest.config.empty()) {
        std::ifstream in(manifest.config);
        if (!in) {
            throw Error(ErrorKind::IoError, "cannot open config " + manifest.config);
        }
        std::ostringstream buffer;
        buffer << in.rdbuf();
        for (const auto& [k, v] : parse_config(buffer.str(), manifest.config)) {
            s[k] = v;
        }
    }
    for (const auto& [k, v] : manifest.overrides) {
        if (default_settings().count(k) == 0) {
            throw Error(ErrorKind::InvalidArgument, "unknown setting '" + k + "'");
        }
        s[k] = v;
    }
    return s;
}

Hyperparameters hyperparameters_from(const Settings& s)
{
    Hyperparameters hp;
    hp.nu0 = to_double(s, "nu0");
    hp.nu1 = to_double(s, "nu1");
    hp.lambda = to_double(s, "lambda");
    hp.nuB = to_double(s, "nu_b");
    hp.a_gamma = to_double(s, "a_gamma");
    hp.b_gamma = to_double(s, "b_gamma");
    hp.a_pi = to_double(s, "a_pi");
    hp.b_pi = to_double(s, "b_pi");
    hp.a_tau = to_double(s, "a_tau");
    hp.b_tau = to_double(s, "b_tau");
    hp.learn_tau = to_bool(s, "learn_tau");
    hp.validate();
    return hp;
}

FitConfig fit_config_from(const Settings& s)
{
    FitConfig cfg;
    cfg.outer_tol = to_double(s, "outer_tol");
    cfg.inner_tol = to_double(s, "inner_tol");
    cfg.max_outer_iters = static_cast<int>(to_long(s, "max_outer_iters"));
    cfg.max_inner_iters = static_cast<int>(to_long(s, "max_inner_iters"));
    cfg.lbfgs.memory = static_cast<int>(to_long(s, "lbfgs_memory"));
    cfg.lbfgs.gradient_tol = to_double(s, "lbfgs_gradient_tol");
    cfg.lbfgs.max_evaluations = static_cast<int>(to_long(s, "lbfgs_max_evaluations"));
    cfg.thread_count = static_cast<int>(to_long(s, "threads"));
    cfg.seed = static_cast<std::uint64_t>(to_long(s, "seed"));
    cfg.constrain_B_zero = to_bool(s, "constrain_b_zero");
    cfg.constrain_omega_identity = to_bool(s, "constrain_omega_identity");
    const std::string& mode = lookup(s, "residual_variance");
    if (mode == "conditional") {
        cfg.residual_variance = ResidualVariance::Conditional;
    } else if (mode == "marginal") {
        cfg.residual_variance = ResidualVariance::Marginal;
    } else {
        throw Error(ErrorKind::InvalidArgument,
                    "residual_variance must be conditional or marginal, got '" + mode + "'");
    }
    cfg.validate();
    return cfg;
}

GraphSpec graph_spec_from(const Settings& s)
{
    GraphSpec g;
    g.kind = parse_graph_kind(lookup(s, "graph"));
    g.p = to_long(s, "p");
    g.bandwidth = to_long(s, "bandwidth");
    g.n_hubs = to_long(s, "n_hubs");
    g.edge_prob = to_double(s, "edge_prob");
    g.within_cluster_prob = to_double(s, "within_cluster_prob");
    g.n_clusters = to_long(s, "n_clusters");
    g.validate();
    return g;
}

std::vector<double> nu0_grid_from(const Settings& s)
{
    const std::string& text = lookup(s, "nu0_grid");
    if (trim(text).empty()) {
        return default_nu0_grid();
    }
    std::vector<double> grid;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        Settings one{{"nu0_grid", trim(item)}};
        grid.push_back(to_double(one, "nu0_grid"));
    }
    return grid;
}

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidArgument: return 2;
    case ErrorKind::ParseError:
    case ErrorKind::NegativeCount:
    case ErrorKind::RaggedRows:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::DegenerateColumn:
    case ErrorKind::NonFiniteEntry:
    case ErrorKind::UniverseMismatch: return 3;
    case ErrorKind::NonFiniteResult:
    case ErrorKind::SingularBlock: return 4;
    case ErrorKind::IoError: return 5;
    }
    return 1;
}

int run_command(const RunManifest& manifest, std::ostream& log)
{
    log << "[" << timestamp() << "] sinc " << manifest.command << " started\n";
    int status = 0;
    try {
        const Settings s = resolve_settings(manifest);
        if (manifest.command == "simulate") {
            status = run_simulate(manifest, s, log);
        } else if (manifest.command == "fit") {
            status = run_fit(manifest, s, log);
        } else if (manifest.command == "grid") {
            status = run_grid(manifest, s, log);
        } else if (manifest.command == "evaluate") {
            status = run_evaluate(manifest, s, log);
        } else {
            throw Error(ErrorKind::InvalidArgument, "unknown command '" + manifest.command + "'");
        }
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        status = exit_code(e.kind());
    }
    log << "[" << timestamp() << "] sinc " << manifest.command << " finished with status "
        << status << "\n";
    return status;
}

}  // namespace sinc
