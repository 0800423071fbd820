#include "codebpc/fit.hpp"

#include "codebpc/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace codebpc {

using nlohmann::json;

ObservationPoint ObservationPoint::make(std::string model, double bpc, double c, std::map<std::string, std::string> slices) {
    ObservationPoint p;
    p.model_name = std::move(model);
    p.bpc_bits = bpc;
    p.composite_c = c;
    p.log_c = c > 0.0 ? std::log(c) : -std::numeric_limits<double>::infinity();
    p.slices = std::move(slices);
    return p;
}

LinearFit fit_least_squares(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw compute_error("least squares needs at least 3 points, got " + std::to_string(points.size()));
    for (const auto& [x, y] : points)
        if (!std::isfinite(x) || !std::isfinite(y)) throw compute_error("non-finite observation in fit");
    const auto [xmin, xmax] = std::minmax_element(points.begin(), points.end(),
                                                  [](const auto& a, const auto& b) { return a.first < b.first; });
    if (xmin->first == xmax->first) throw compute_error("degenerate abscissa: all x values are equal");
    const auto [ymin, ymax] = std::minmax_element(points.begin(), points.end(),
                                                  [](const auto& a, const auto& b) { return a.second < b.second; });
    if (ymin->second == ymax->second) throw compute_error("Pearson undefined: all y values are equal");

    const double n = static_cast<double>(points.size());
    CompensatedSum sx, sy;
    for (const auto& [x, y] : points) {
        sx.add(x);
        sy.add(y);
    }
    const double mx = sx.value() / n, my = sy.value() / n;
    CompensatedSum sxx, sxy, syy;
    for (const auto& [x, y] : points) {
        sxx.add((x - mx) * (x - mx));
        sxy.add((x - mx) * (y - my));
        syy.add((y - my) * (y - my));
    }
    LinearFit fit;
    fit.n = points.size();
    fit.slope = sxy.value() / sxx.value();
    fit.intercept = my - fit.slope * mx;
    fit.pearson_r = std::clamp(sxy.value() / std::sqrt(sxx.value() * syy.value()), -1.0, 1.0);
    CompensatedSum sse;
    for (const auto& [x, y] : points) {
        const double e = y - (fit.slope * x + fit.intercept);
        sse.add(e * e);
    }
    fit.rmse = std::sqrt(sse.value() / n);
    return fit;
}

std::string_view model_form_name(ModelForm f) noexcept { return f == ModelForm::log_linear ? "log-linear" : "linear"; }

namespace {

double rmse_of(const std::vector<double>& a, const std::vector<double>& b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add((a[i] - b[i]) * (a[i] - b[i]));
    return std::sqrt(s.value() / static_cast<double>(a.size()));
}

}  // namespace

FitReport fit_log_model(const std::vector<ObservationPoint>& points, PearsonSpace pearson) {
    std::vector<std::pair<double, double>> xy;
    std::vector<double> c, log_c;
    for (const auto& p : points) {
        if (!(p.composite_c > 0.0)) throw compute_error("log-linear fit needs C > 0; '" + p.model_name + "' has C = " +
                                                        std::to_string(p.composite_c));
        xy.emplace_back(p.bpc_bits, std::log(p.composite_c));
        c.push_back(p.composite_c);
        log_c.push_back(xy.back().second);
    }
    const LinearFit fit = fit_least_squares(xy);
    FitReport r;
    r.form = ModelForm::log_linear;
    r.slope = fit.slope;
    r.intercept = fit.intercept;
    r.n = fit.n;
    r.rmse_fit_space = fit.rmse;
    std::vector<double> pred_log;
    for (const auto& [x, y] : xy) {
        pred_log.push_back(fit.slope * x + fit.intercept);
        r.residuals.push_back(y - pred_log.back());
        r.predicted_c.push_back(std::exp(pred_log.back()));
    }
    r.rmse_backtransformed = rmse_of(c, r.predicted_c);
    if (pearson == PearsonSpace::log_c) {
        r.pearson_r = fit.pearson_r;
    } else {
        std::vector<std::pair<double, double>> raw;
        for (const auto& p : points) raw.emplace_back(p.bpc_bits, p.composite_c);
        r.pearson_r = fit_least_squares(raw).pearson_r;
    }
    return r;
}

FitReport fit_linear_model(const std::vector<ObservationPoint>& points) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : points) xy.emplace_back(p.bpc_bits, p.composite_c);
    const LinearFit fit = fit_least_squares(xy);
    FitReport r;
    r.form = ModelForm::linear;
    r.slope = fit.slope;
    r.intercept = fit.intercept;
    r.pearson_r = fit.pearson_r;
    r.n = fit.n;
    r.rmse_fit_space = fit.rmse;
    r.rmse_backtransformed = fit.rmse;
    for (const auto& [x, y] : xy) {
        r.predicted_c.push_back(fit.slope * x + fit.intercept);
        r.residuals.push_back(y - r.predicted_c.back());
    }
    return r;
}

FitReport fit_model(const std::vector<ObservationPoint>& points, ModelForm form) {
    return form == ModelForm::log_linear ? fit_log_model(points) : fit_linear_model(points);
}

ModelComparison compare_models(const std::vector<ObservationPoint>& points) {
    ModelComparison cmp;
    cmp.ranked = {fit_log_model(points), fit_linear_model(points)};
    std::stable_sort(cmp.ranked.begin(), cmp.ranked.end(),
                     [](const auto& a, const auto& b) { return a.rmse_backtransformed < b.rmse_backtransformed; });
    return cmp;
}

FitReport slice_fit(const std::vector<ObservationPoint>& points, const std::string& key, const std::string& value,
                    ModelForm form) {
    std::vector<ObservationPoint> subset;
    for (const auto& p : points)
        if (auto it = p.slices.find(key); it != p.slices.end() && it->second == value) subset.push_back(p);
    if (subset.size() < 3)
        throw compute_error("slice " + key + "=" + value + " has " + std::to_string(subset.size()) +
                            " points; at least 3 are required");
    FitReport r = fit_model(subset, form);
    r.slice = key + "=" + value;
    return r;
}

std::vector<ObservationPoint> read_points(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open points " + path.string());
    std::vector<ObservationPoint> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
        try {
            const json obj = json::parse(line);
            if (obj.contains("kind")) continue;  // artifact header
            auto p = ObservationPoint::make(obj.at("model").get<std::string>(), obj.at("bpc").get<double>(),
                                            obj.at("C").get<double>(),
                                            obj.value("slices", std::map<std::string, std::string>{}));
            if (obj.contains("log_C") && !obj["log_C"].is_null() && p.composite_c > 0.0 &&
                std::abs(obj["log_C"].get<double>() - p.log_c) > 1e-12)
                throw input_error(where + "log_C disagrees with ln(C)");
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw input_error(where + e.what());
        }
    }
    return out;
}

void write_points(const std::vector<ObservationPoint>& points, const std::filesystem::path& path,
                  const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw output_error("cannot write points " + path.string());
    out << json{{"kind", "observation_points"}, {"tool_version", kToolVersion}, {"config_hash", config_hash}}.dump()
        << '\n';
    for (const auto& p : points) {
        json obj = {{"model", p.model_name}, {"bpc", p.bpc_bits}, {"C", p.composite_c}, {"slices", p.slices}};
        obj["log_C"] = p.composite_c > 0.0 ? json(p.log_c) : json(nullptr);
        out << obj.dump() << '\n';
    }
    if (!out) throw output_error("write failed for " + path.string());
}

json fit_report_json(const FitReport& r, const std::vector<ObservationPoint>& points) {
    json rows = json::array();
    for (std::size_t i = 0; i < r.residuals.size() && i < points.size(); ++i)
        rows.push_back({{"model", points[i].model_name}, {"predicted_C", r.predicted_c[i]}, {"residual", r.residuals[i]}});
    json out = {{"model_form", model_form_name(r.form)},
                {"slope", r.slope},
                {"intercept", r.intercept},
                {"pearson_r", r.pearson_r},
                {"rmse_fit_space", r.rmse_fit_space},
                {"rmse_backtransformed", r.rmse_backtransformed},
                {"rmse_backtransformed_pp", 100.0 * r.rmse_backtransformed},
                {"n", r.n},
                {"residuals", rows}};
    if (!r.slice.empty()) out["slice"] = r.slice;
    return out;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace

PlotArtifacts emit_plot_data(const std::vector<FitReport>& reports, const std::vector<ObservationPoint>& points,
                             const std::filesystem::path& stem, const std::string& config_hash) {
    if (points.empty()) throw compute_error("no points to plot");
    if (reports.empty()) throw compute_error("no fit reports to plot");
    PlotArtifacts out{stem, stem};
    out.csv += ".csv";
    out.svg += ".svg";

    const FitReport& primary = reports.front();
    {
        std::ofstream csv(out.csv, std::ios::binary);
        if (!csv) throw output_error("cannot write " + out.csv.string());
        csv << "# tool_version=" << kToolVersion << " config_hash=" << config_hash
            << " model_form=" << model_form_name(primary.form) << '\n';
        csv << "model,bpc,C,log_C,predicted,residual\n";
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& p = points[i];
            csv << csv_field(p.model_name) << ',' << num(p.bpc_bits) << ',' << num(p.composite_c) << ','
                << (p.composite_c > 0.0 ? num(p.log_c) : std::string("nan")) << ','
                << (i < primary.predicted_c.size() ? num(primary.predicted_c[i]) : std::string()) << ','
                << (i < primary.residuals.size() ? num(primary.residuals[i]) : std::string()) << '\n';
        }
        if (!csv) throw output_error("write failed for " + out.csv.string());
    }

    // Plot in ln C when the primary form is log-linear, else in C.
    const bool log_space = primary.form == ModelForm::log_linear;
    auto y_of = [&](double c) { return log_space ? std::log(c) : c; };
    double x0 = points[0].bpc_bits, x1 = x0, y0 = y_of(points[0].composite_c), y1 = y0;
    for (const auto& p : points) {
        x0 = std::min(x0, p.bpc_bits), x1 = std::max(x1, p.bpc_bits);
        y0 = std::min(y0, y_of(p.composite_c)), y1 = std::max(y1, y_of(p.composite_c));
    }
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.05 * (x1 - x0), pady = 0.05 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
    constexpr double W = 640, H = 480, L = 70, R = 20, T = 30, B = 50;
    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ofstream svg(out.svg, std::ios::binary);
    if (!svg) throw output_error("cannot write " + out.svg.string());
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<!-- tool_version=" << kToolVersion << " config_hash=" << config_hash << " -->\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
        << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n"
        << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << (W + L - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"14\">BPC (bits)</text>\n"
        << "<text x=\"18\" y=\"" << (H - B + T) / 2 << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 "
        << (H - B + T) / 2 << ")\">" << (log_space ? "ln C" : "C") << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        svg << "<text x=\"" << px(sx(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
            << px(xv) << "</text>\n";
        svg << "<text x=\"" << L - 6 << "\" y=\"" << px(sy(yv) + 3) << "\" text-anchor=\"end\" font-size=\"10\">" << px(yv)
            << "</text>\n";
    }
    const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const auto& r = reports[k];
        svg << "<polyline class=\"fit\" data-form=\"" << model_form_name(r.form) << "\" fill=\"none\" stroke=\""
            << colors[k % 4] << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (int s = 0; s <= 100; ++s) {
            const double x = x0 + (x1 - x0) * s / 100.0;
            const double fit_y = r.slope * x + r.intercept;
            double y;
            if (r.form == ModelForm::log_linear) {
                y = log_space ? fit_y : std::exp(fit_y);
            } else {
                if (log_space && fit_y <= 0.0) continue;
                y = log_space ? std::log(fit_y) : fit_y;
            }
            if (y < y0 || y > y1) continue;
            svg << (first ? "" : " ") << px(sx(x)) << ',' << px(sy(y));
            first = false;
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (k + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
            << colors[k % 4] << "\">" << model_form_name(r.form) << " r=" << px(r.pearson_r)
            << " rmse(C)=" << px(100.0 * r.rmse_backtransformed) << "%</text>\n";
    }
    for (const auto& p : points)
        svg << "<circle class=\"point\" cx=\"" << px(sx(p.bpc_bits)) << "\" cy=\"" << px(sy(y_of(p.composite_c)))
            << "\" r=\"4\" fill=\"#333\"><title>" << xml_escape(p.model_name) << "</title></circle>\n";
    svg << "</svg>\n";
    if (!svg) throw output_error("write failed for " + out.svg.string());
    return out;
}

std::vector<ObservationPoint> read_plot_csv(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw input_error("cannot open " + csv.string());
    std::vector<ObservationPoint> out;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line.starts_with("#")) continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() < 3) throw input_error(csv.string() + ": malformed row");
        out.push_back(ObservationPoint::make(f[0], std::stod(f[1]), std::stod(f[2])));
    }
    return out;
}

}  // namespace codebpc
