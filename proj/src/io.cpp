#include "sinc/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sinc {

namespace fs = std::filesystem;

namespace {

std::string location(const std::string& source, std::size_t line, std::size_t field)
{
    return source + " at (" + std::to_string(line) + "," + std::to_string(field) + ")";
}

std::string trim(const std::string& s)
{
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r");
    std::string out = s.substr(begin, end - begin + 1);
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
        out = out.substr(1, out.size() - 2);
    }
    return out;
}

std::vector<std::string> split(const std::string& line, char delim)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, delim)) {
        out.push_back(trim(field));
    }
    if (!line.empty() && line.back() == delim) {
        out.emplace_back();
    }
    return out;
}

bool parse_number(const std::string& s, double& out)
{
    if (s.empty()) {
        return false;
    }
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (*begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

bool is_number(const std::string& s)
{
    double ignored = 0.0;
    return parse_number(s, ignored);
}

struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

std::string join_path(const fs::path& dir, const char* name)
{
    return (dir / name).string();
}

std::vector<std::string> index_names(const char* prefix, Index count)
{
    std::vector<std::string> out;
    for (Index i = 0; i < count; ++i) {
        out.push_back(prefix + std::to_string(i + 1));
    }
    return out;
}

Matrix to_real(const BoolMatrix& b)
{
    return b.cast<double>();
}

}  // namespace

LabeledMatrix parse_matrix(const std::string& text, MatrixKind kind, const std::string& source)
{
    std::vector<Row> rows;
    {
        std::istringstream in(text);
        std::string line;
        std::size_t number = 0;
        char delim = 0;
        while (std::getline(in, line)) {
            ++number;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (trim(line).empty()) {
                continue;
            }
            if (delim == 0) {
                delim = line.find('\t') != std::string::npos ? '\t' : ',';
            }
            rows.push_back({number, split(line, delim)});
        }
    }
    if (rows.empty()) {
        throw Error(ErrorKind::ParseError, source + ": no data");
    }

    LabeledMatrix out;
    std::size_t first_data = 0;
    bool header = false;
    for (const std::string& f : rows.front().fields) {
        if (!is_number(f)) {
            header = true;
        }
    }
    if (header) {
        first_data = 1;
    }
    if (first_data >= rows.size()) {
        throw Error(ErrorKind::ParseError, source + ": header but no data rows");
    }

    bool labels = true;
    for (std::size_t r = first_data; r < rows.size(); ++r) {
        if (is_number(rows[r].fields.front())) {
            labels = false;
            break;
        }
    }
    const std::size_t width = rows[first_data].fields.size();
    for (std::size_t r = first_data; r < rows.size(); ++r) {
        if (rows[r].fields.size() != width) {
            throw Error(ErrorKind::RaggedRows,
                        source + ": line " + std::to_string(rows[r].line) + " has " +
                            std::to_string(rows[r].fields.size()) + " fields, expected " +
                            std::to_string(width));
        }
    }
    const std::size_t offset = labels ? 1 : 0;
    const std::size_t cols = width - offset;

    if (header) {
        std::vector<std::string> names = rows.front().fields;
        if (labels && names.size() == width) {
            names.erase(names.begin());
        }
        if (names.size() != cols) {
            throw Error(ErrorKind::RaggedRows, source + ": header has " +
                                                   std::to_string(rows.front().fields.size()) +
                                                   " fields, data rows have " +
                                                   std::to_string(width));
        }
        out.col_names = std::move(names);
    }

    const std::size_t n = rows.size() - first_data;
    out.values.resize(static_cast<Index>(n), static_cast<Index>(cols));
    for (std::size_t r = 0; r < n; ++r) {
        const Row& row = rows[first_data + r];
        if (labels) {
            out.row_names.push_back(row.fields.front());
        }
        for (std::size_t c = 0; c < cols; ++c) {
            const std::string& f = row.fields[c + offset];
            double v = 0.0;
            if (!parse_number(f, v)) {
                throw Error(ErrorKind::ParseError, location(source, row.line, c + offset + 1) +
                                                       ": '" + f + "' is not a number");
            }
            if (kind == MatrixKind::Counts) {
                if (v < 0) {
                    throw Error(ErrorKind::NegativeCount,
                                location(source, row.line, c + offset + 1) + ": count " + f +
                                    " is negative");
                }
                if (!std::isfinite(v) || v != std::floor(v)) {
                    throw Error(ErrorKind::ParseError, location(source, row.line, c + offset + 1) +
                                                           ": '" + f +
                                                           "' is not a nonnegative integer");
                }
            }
            out.values(static_cast<Index>(r), static_cast<Index>(c)) = v;
        }
    }
    return out;
}

LabeledMatrix load_matrix(const fs::path& path, MatrixKind kind)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_matrix(buffer.str(), kind, path.string());
}

CountMatrix load_counts(const fs::path& path)
{
    LabeledMatrix m = load_matrix(path, MatrixKind::Counts);
    return CountMatrix(std::move(m.values), std::move(m.col_names));
}

CovariateMatrix load_covariates(const fs::path& path)
{
    LabeledMatrix m = load_matrix(path, MatrixKind::Reals);
    return CovariateMatrix(std::move(m.values), std::move(m.col_names));
}

BoolMatrix load_boolean(const fs::path& path)
{
    const LabeledMatrix m = load_matrix(path, MatrixKind::Reals);
    return (m.values.array() != 0.0).matrix();
}

std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.flush();
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
}

void write_matrix(const fs::path& path, const Matrix& values,
                  const std::vector<std::string>& col_names,
                  const std::vector<std::string>& row_names)
{
    if (static_cast<Index>(col_names.size()) != values.cols() ||
        (!row_names.empty() && static_cast<Index>(row_names.size()) != values.rows())) {
        throw Error(ErrorKind::DimensionMismatch, "names do not match matrix shape for " +
                                                      path.string());
    }
    std::string text;
    if (!row_names.empty()) {
        text += "\t";
    }
    for (std::size_t c = 0; c < col_names.size(); ++c) {
        text += (c ? "\t" : "") + col_names[c];
    }
    text += "\n";
    for (Index i = 0; i < values.rows(); ++i) {
        if (!row_names.empty()) {
            text += row_names[static_cast<std::size_t>(i)] + "\t";
        }
        for (Index j = 0; j < values.cols(); ++j) {
            text += (j ? "\t" : "") + format_double(values(i, j));
        }
        text += "\n";
    }
    write_text(path, text);
}

void write_outputs(const FitResult& result, const CountMatrix& X, const CovariateMatrix& M,
                   const fs::path& dir, const std::string& run_record)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    const auto& taxa = X.names();
    const auto& covs = M.names();
    const RegressionState& reg = result.regression;

    write_matrix(join_path(dir, "omega.tsv"), result.network.omega, taxa, taxa);
    write_matrix(join_path(dir, "p_star.tsv"), result.network.p_star, taxa, taxa);
    write_matrix(join_path(dir, "adjacency.tsv"), to_real(result.selected_adjacency), taxa, taxa);
    write_matrix(join_path(dir, "b.tsv"), reg.B, taxa, covs);
    write_matrix(join_path(dir, "phi.tsv"), reg.phi, taxa, covs);
    write_matrix(join_path(dir, "b0.tsv"), reg.B0.transpose(), taxa);

    // Coefficients for the covariates on their original scale.
    Matrix b_original = reg.B;
    Vector b0_original = reg.B0;
    for (Index k = 0; k < reg.B.rows(); ++k) {
        const double s = M.scale()(k);
        b_original.row(k) = s > 0 ? Vector(reg.B.row(k).transpose() / s) : Vector::Zero(reg.p());
        b0_original -= b_original.row(k).transpose() * M.center()(k);
    }
    write_matrix(join_path(dir, "b_original.tsv"), b_original, taxa, covs);
    write_matrix(join_path(dir, "b0_original.tsv"), b0_original.transpose(), taxa);

    const Index steps = static_cast<Index>(result.elbo_trace.size());
    Matrix trace(steps, 4);
    for (Index t = 0; t < steps; ++t) {
        const auto k = static_cast<std::size_t>(t);
        trace(t, 0) = static_cast<double>(t);
        trace(t, 1) = result.elbo_trace[k];
        trace(t, 2) = k < result.omega_min_eigen.size() ? result.omega_min_eigen[k] : NAN;
        trace(t, 3) = k < result.omega_asymmetry.size() ? result.omega_asymmetry[k] : NAN;
    }
    write_matrix(join_path(dir, "elbo_trace.tsv"), trace,
                 {"iteration", "elbo", "omega_min_eigenvalue", "omega_asymmetry"});
    write_text(join_path(dir, "run.json"), run_record);
}

void write_ground_truth(const GroundTruth& truth, const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    const auto& taxa = truth.counts.names();
    const auto& covs = truth.covariates.names();
    const auto samples = index_names("sample_", truth.counts.rows());
    write_matrix(join_path(dir, "counts.tsv"), truth.counts.values(), taxa, samples);
    write_matrix(join_path(dir, "covariates.tsv"), truth.covariates.raw(), covs, samples);
    write_matrix(join_path(dir, "b_true.tsv"), truth.B_true, taxa, covs);
    write_matrix(join_path(dir, "b0_true.tsv"), truth.B0_true.transpose(), taxa);
    write_matrix(join_path(dir, "omega_true.tsv"), truth.omega_true, taxa, taxa);
    write_matrix(join_path(dir, "adjacency_true.tsv"), to_real(truth.adjacency), taxa, taxa);
}

}  // namespace sinc
