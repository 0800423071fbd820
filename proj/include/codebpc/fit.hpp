#pragma once

#include "json.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace codebpc {

struct ObservationPoint {
    std::string model_name;
    double bpc_bits = 0.0;
    double composite_c = 0.0;
    double log_c = 0.0;  ///< ln(composite_c)
    std::map<std::string, std::string> slices;  ///< e.g. {"task": "generation"}

    static ObservationPoint make(std::string model, double bpc, double c, std::map<std::string, std::string> slices = {});
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double pearson_r = 0.0;
    double rmse = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y = slope * x + intercept with Pearson r and residual RMSE.
/// Throws compute_error for fewer than 3 points, "degenerate abscissa" when x has zero
/// variance, and "Pearson undefined" when y has zero variance.
LinearFit fit_least_squares(const std::vector<std::pair<double, double>>& points);

enum class ModelForm {
    log_linear,  ///< ln C = slope * BPC + intercept
    linear,      ///< C = slope * BPC + intercept
};
std::string_view model_form_name(ModelForm f) noexcept;

/// Space in which Pearson r is reported for the log-linear form.
enum class PearsonSpace { log_c, c };

struct FitReport {
    ModelForm form = ModelForm::log_linear;
    double slope = 0.0;
    double intercept = 0.0;
    double pearson_r = 0.0;
    double rmse_fit_space = 0.0;        ///< in ln C for log-linear, C for linear
    double rmse_backtransformed = 0.0;  ///< in C (fraction of score)
    std::vector<double> predicted_c;    ///< per point, in C
    std::vector<double> residuals;      ///< per point, fit space
    std::size_t n = 0;
    std::string slice;                  ///< "key=value" or empty
};

/// Fits (BPC, ln C). Throws compute_error when any C <= 0.
FitReport fit_log_model(const std::vector<ObservationPoint>& points, PearsonSpace pearson = PearsonSpace::log_c);
/// Fits (BPC, C).
FitReport fit_linear_model(const std::vector<ObservationPoint>& points);
FitReport fit_model(const std::vector<ObservationPoint>& points, ModelForm form);

struct ModelComparison {
    std::vector<FitReport> ranked;  ///< ascending rmse_backtransformed; ties keep log-linear first
    ModelForm winner() const { return ranked.front().form; }
};

ModelComparison compare_models(const std::vector<ObservationPoint>& points);

/// Fit restricted to points whose slices[key] == value. Throws compute_error when
/// fewer than 3 points carry the label.
FitReport slice_fit(const std::vector<ObservationPoint>& points, const std::string& key, const std::string& value,
                    ModelForm form = ModelForm::log_linear);

/// JSON Lines of {model, bpc, C, slices, log_C}; a line carrying a "kind" field is an
/// artifact header and is skipped.
std::vector<ObservationPoint> read_points(const std::filesystem::path& path);
void write_points(const std::vector<ObservationPoint>& points, const std::filesystem::path& path,
                  const std::string& config_hash = {});
nlohmann::json fit_report_json(const FitReport& r, const std::vector<ObservationPoint>& points);

struct PlotArtifacts {
    std::filesystem::path csv;
    std::filesystem::path svg;
};

/// Writes <stem>.csv with (model, bpc, C, log_C, predicted, residual) for reports[0]
/// and <stem>.svg with one marker per point and one line per report. Throws
/// compute_error for empty input and output_error for unwritable paths.
PlotArtifacts emit_plot_data(const std::vector<FitReport>& reports, const std::vector<ObservationPoint>& points,
                             const std::filesystem::path& stem, const std::string& config_hash = {});

/// Points recovered from an emitted CSV (values round-trip exactly).
std::vector<ObservationPoint> read_plot_csv(const std::filesystem::path& csv);

}  // namespace codebpc
