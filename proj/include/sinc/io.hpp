#pragma once

#include "sinc/driver.hpp"
#include "sinc/synthetic.hpp"
#include "sinc/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sinc {

enum class MatrixKind { Counts, Reals };

struct LabeledMatrix {
    Matrix values;
    std::vector<std::string> col_names;  // empty when the text has no header
    std::vector<std::string> row_names;  // empty when there is no label column
};

/// Delimited text (comma or tab, picked from the first line). A first row
/// with any non-numeric field is a header; a first column that is
/// non-numeric on every data row holds row labels. Errors carry 1-based
/// (line, field) locations: ParseError, RaggedRows, NegativeCount.
LabeledMatrix parse_matrix(const std::string& text, MatrixKind kind,
                           const std::string& source = "<input>");
LabeledMatrix load_matrix(const std::filesystem::path& path, MatrixKind kind);

CountMatrix load_counts(const std::filesystem::path& path);
CovariateMatrix load_covariates(const std::filesystem::path& path);
/// Nonzero entries are true.
BoolMatrix load_boolean(const std::filesystem::path& path);

/// %.17g, so reading the text back gives the same double.
std::string format_double(double x);

/// Tab-separated with a header row; with row names the header starts with an empty cell.
void write_matrix(const std::filesystem::path& path, const Matrix& values,
                  const std::vector<std::string>& col_names,
                  const std::vector<std::string>& row_names = {});
void write_text(const std::filesystem::path& path, const std::string& text);

/// omega, p_star, adjacency, b, phi, b0, elbo_trace, plus b_original and
/// b0_original on the unscaled covariates, and run.json holding run_record.
void write_outputs(const FitResult& result, const CountMatrix& X, const CovariateMatrix& M,
                   const std::filesystem::path& dir, const std::string& run_record);

/// counts, covariates, b_true, b0_true, omega_true, adjacency_true.
void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& dir);

}  // namespace sinc
