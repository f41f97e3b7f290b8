#include "align/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "align/error.hpp"

namespace align {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    char* end = nullptr;
    out = std::strtod(text.c_str(), &end);
    return end == text.c_str() + text.size();
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io_parse, "cannot open '" + path + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) {
            rows.push_back({});
            continue;
        }
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

bool all_numeric(const std::vector<std::string>& cells) {
    double v;
    for (const auto& c : cells) {
        if (!parse_double(c, v)) return false;
    }
    return !cells.empty();
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

} // namespace

CsvFormat parse_csv_format(const std::string& name) {
    if (name == "auto" || name.empty()) return CsvFormat::automatic;
    if (name == "long") return CsvFormat::long_format;
    if (name == "wide") return CsvFormat::wide;
    throw Error(errc::bad_config, "unknown CSV format '" + name + "' (auto|long|wide)");
}

namespace {

Dataset load_long(const std::vector<std::vector<std::string>>& rows, const std::string& path) {
    std::vector<std::string> order;
    std::map<std::string, Curve> curves;
    size_t start = 0;
    if (!rows.empty() && !all_numeric(rows[0])) {
        const bool looks_long = rows[0].size() == 3;
        if (!looks_long) throw Error(errc::io_parse, path + ":1: long format needs 3 columns");
        start = 1;
    }
    for (size_t r = start; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        if (cells.empty()) continue;
        const std::string where = path + ":" + std::to_string(r + 1);
        if (cells.size() != 3) throw Error(errc::io_parse, where + ": expected (curve_id, t, y)");
        double t, y;
        if (!parse_double(cells[1], t) || !parse_double(cells[2], y)) {
            throw Error(errc::io_parse, where + ": non-numeric cell");
        }
        auto [it, inserted] = curves.try_emplace(cells[0]);
        if (inserted) {
            it->second.id = cells[0];
            order.push_back(cells[0]);
        }
        Curve& c = it->second;
        const int n = c.size();
        c.times.conservativeResize(n + 1);
        c.values.conservativeResize(n + 1);
        if (n > 0 && !(t > c.times(n - 1))) {
            throw Error(errc::io_parse,
                        where + ": times of curve '" + cells[0] + "' not strictly increasing");
        }
        c.times(n) = t;
        c.values(n) = y;
    }
    Dataset data;
    for (const auto& id : order) data.push_back(curves.at(id));
    if (data.empty()) throw Error(errc::io_parse, path + ": no curves found");
    for (const Curve& c : data) c.validate();
    return data;
}

Dataset load_wide(const std::vector<std::vector<std::string>>& rows, const std::string& path) {
    if (rows.empty()) throw Error(errc::io_parse, path + ": empty file");
    size_t start = 0;
    std::vector<std::string> ids;
    if (!all_numeric(rows[0])) {
        for (size_t c = 1; c < rows[0].size(); ++c) ids.push_back(rows[0][c]);
        start = 1;
    }
    size_t n_cols = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> columns;
    for (size_t r = start; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        if (cells.empty()) continue;
        const std::string where = path + ":" + std::to_string(r + 1);
        if (n_cols == 0) {
            n_cols = cells.size();
            if (n_cols < 2) throw Error(errc::io_parse, where + ": wide format needs t plus curves");
            columns.resize(n_cols - 1);
        }
        if (cells.size() != n_cols) {
            throw Error(errc::io_parse, where + ": ragged row (" + std::to_string(cells.size()) +
                                            " cells, expected " + std::to_string(n_cols) + ")");
        }
        double t;
        if (!parse_double(cells[0], t)) throw Error(errc::io_parse, where + ": non-numeric time");
        if (!times.empty() && !(t > times.back())) {
            throw Error(errc::io_parse, where + ": times not strictly increasing");
        }
        times.push_back(t);
        for (size_t c = 1; c < n_cols; ++c) {
            double v;
            if (!parse_double(cells[c], v)) throw Error(errc::io_parse, where + ": non-numeric cell");
            columns[c - 1].push_back(v);
        }
    }
    if (times.empty()) throw Error(errc::io_parse, path + ": no data rows");
    if (ids.empty()) {
        for (size_t c = 0; c < n_cols - 1; ++c) ids.push_back("c" + std::to_string(c + 1));
    }
    if (ids.size() != n_cols - 1) throw Error(errc::io_parse, path + ": header width vs data width");
    Dataset data(ids.size());
    for (size_t c = 0; c < ids.size(); ++c) {
        data[c].id = ids[c];
        data[c].times = Eigen::Map<const Eigen::VectorXd>(times.data(), times.size());
        data[c].values = Eigen::Map<const Eigen::VectorXd>(columns[c].data(), columns[c].size());
        data[c].validate();
    }
    return data;
}

} // namespace

Dataset load_curves(const std::string& path, CsvFormat format) {
    const auto rows = read_csv_rows(path);
    if (format == CsvFormat::long_format) return load_long(rows, path);
    if (format == CsvFormat::wide) return load_wide(rows, path);
    // automatic: headers from our writers name their first column; otherwise
    // column count decides.
    if (!rows.empty() && !all_numeric(rows[0])) {
        const std::string head = lower(rows[0].empty() ? "" : rows[0][0]);
        if (head == "t" || head == "time") return load_wide(rows, path);
        if (head == "curve_id" || head == "id" || head == "curve") return load_long(rows, path);
        return rows[0].size() == 3 ? load_long(rows, path) : load_wide(rows, path);
    }
    for (const auto& r : rows) {
        if (!r.empty()) {
            return r.size() == 3 ? load_long(rows, path) : load_wide(rows, path);
        }
    }
    throw Error(errc::io_parse, path + ": empty file");
}

namespace {

bool common_grid(const Dataset& data) {
    for (size_t i = 1; i < data.size(); ++i) {
        if (data[i].times.size() != data[0].times.size()) return false;
        if ((data[i].times - data[0].times).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(errc::io_parse, "cannot write '" + path + "'");
    return out;
}

} // namespace

void save_curves(const std::string& path, const Dataset& data) {
    if (data.empty()) throw Error(errc::bad_config, "refusing to save an empty dataset");
    std::ofstream out = open_out(path);
    if (common_grid(data)) {
        out << "t";
        for (const Curve& c : data) out << "," << c.id;
        out << "\n";
        for (int j = 0; j < data[0].size(); ++j) {
            out << format_double(data[0].times(j));
            for (const Curve& c : data) out << "," << format_double(c.values(j));
            out << "\n";
        }
    } else {
        out << "curve_id,t,y\n";
        for (const Curve& c : data) {
            for (int j = 0; j < c.size(); ++j) {
                out << c.id << "," << format_double(c.times(j)) << "," << format_double(c.values(j))
                    << "\n";
            }
        }
    }
}

void write_grid_csv(const std::string& path, const std::string& time_header,
                    const Eigen::VectorXd& grid, const Eigen::MatrixXd& columns,
                    const std::vector<std::string>& ids) {
    std::ofstream out = open_out(path);
    out << time_header;
    for (const auto& id : ids) out << "," << id;
    out << "\n";
    for (int r = 0; r < grid.size(); ++r) {
        out << format_double(grid(r));
        for (int c = 0; c < columns.cols(); ++c) out << "," << format_double(columns(r, c));
        out << "\n";
    }
}

namespace {

struct GridCsv {
    Eigen::VectorXd grid;
    Eigen::MatrixXd columns;
    std::vector<std::string> ids;
};

GridCsv read_grid_csv(const std::string& path) {
    const auto rows = read_csv_rows(path);
    if (rows.size() < 2) throw Error(errc::io_parse, path + ": missing data");
    GridCsv out;
    for (size_t c = 1; c < rows[0].size(); ++c) out.ids.push_back(rows[0][c]);
    const int n = static_cast<int>(rows.size()) - 1;
    const int m = static_cast<int>(out.ids.size());
    out.grid.resize(n);
    out.columns.resize(n, m);
    for (int r = 0; r < n; ++r) {
        const auto& cells = rows[r + 1];
        if (static_cast<int>(cells.size()) != m + 1) {
            throw Error(errc::io_parse, path + ":" + std::to_string(r + 2) + ": ragged row");
        }
        double v;
        if (!parse_double(cells[0], v)) throw Error(errc::io_parse, path + ": non-numeric time");
        out.grid(r) = v;
        for (int c = 0; c < m; ++c) {
            if (!parse_double(cells[c + 1], v)) throw Error(errc::io_parse, path + ": non-numeric cell");
            out.columns(r, c) = v;
        }
    }
    return out;
}

// Minimal line-plot SVG: light curves, dark means, fixed viewbox.
class SvgCanvas {
public:
    SvgCanvas(double x0, double x1, double y0, double y1, double width, double height)
        : x0_(x0), x1_(x1), y0_(y0), y1_(y1), width_(width), height_(height) {}

    double px(double x) const { return margin_ + (x - x0_) / (x1_ - x0_) * (width_ - 2 * margin_); }
    double py(double y) const {
        return height_ - margin_ - (y - y0_) / (y1_ - y0_) * (height_ - 2 * margin_);
    }

    void polyline(std::ostringstream& svg, const Eigen::VectorXd& xs, const Eigen::VectorXd& ys,
                  const std::string& color, double stroke, double offset_x = 0.0) const {
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << stroke
            << "\" points=\"";
        for (int j = 0; j < xs.size(); ++j) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(xs(j)) + offset_x, py(ys(j)));
            svg << buf;
        }
        svg << "\"/>\n";
    }

    double margin_ = 32.0;
    double x0_, x1_, y0_, y1_, width_, height_;
};

void write_fit_svg(const std::string& path, const Eigen::VectorXd& grid, const Eigen::MatrixXd& before,
                   const Eigen::MatrixXd& after) {
    const double y_lo = std::min(before.minCoeff(), after.minCoeff());
    const double y_hi = std::max(before.maxCoeff(), after.maxCoeff());
    const double pad = 0.05 * std::max(1e-12, y_hi - y_lo);
    const double panel_w = 420.0, panel_h = 320.0;
    SvgCanvas canvas(grid(0), grid(grid.size() - 1), y_lo - pad, y_hi + pad, panel_w, panel_h);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * panel_w << "\" height=\""
        << panel_h << "\" viewBox=\"0 0 " << 2 * panel_w << " " << panel_h << "\">\n";
    svg << "<text x=\"175\" y=\"18\" font-size=\"13\">unsynchronized (smoothed)</text>\n";
    svg << "<text x=\"" << panel_w + 215 << "\" y=\"18\" font-size=\"13\">synchronized</text>\n";
    for (int panel = 0; panel < 2; ++panel) {
        const Eigen::MatrixXd& curves = panel == 0 ? before : after;
        const double dx = panel * panel_w;
        for (int c = 0; c < curves.cols(); ++c) {
            canvas.polyline(svg, grid, curves.col(c), "#9a9a9a", 1.0, dx);
        }
        canvas.polyline(svg, grid, curves.rowwise().mean(), "#111111", 2.0, dx);
    }
    svg << "</svg>\n";
    open_out(path) << svg.str();
}

void write_frontier_svg(const std::string& path, const TuningReport& report) {
    double s_lo = 1e300, s_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const TuningEntry& e : report.entries) {
        s_lo = std::min(s_lo, e.sigma);
        s_hi = std::max(s_hi, e.sigma);
        y_lo = std::min(y_lo, e.sync);
        y_hi = std::max(y_hi, e.sync);
    }
    if (!(s_hi > s_lo)) s_hi = s_lo + 1.0;
    if (!(y_hi > y_lo)) y_hi = y_lo + 1.0;
    const double w = 480.0, h = 360.0;
    SvgCanvas canvas(s_lo, s_hi, y_lo, y_hi, w, h);
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    svg << "<text x=\"200\" y=\"16\" font-size=\"13\">Sync vs sigma</text>\n";
    for (const TuningEntry& e : report.entries) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", canvas.px(e.sigma),
                      canvas.py(e.sync), e.feasible ? "#4477cc" : "#bbbbbb");
        svg << buf;
    }
    Eigen::VectorXd xs(report.pareto.size()), ys(report.pareto.size());
    for (size_t i = 0; i < report.pareto.size(); ++i) {
        xs(i) = report.entries[report.pareto[i]].sigma;
        ys(i) = report.entries[report.pareto[i]].sync;
    }
    if (xs.size() > 0) canvas.polyline(svg, xs, ys, "#111111", 1.5);
    if (report.chosen) {
        const TuningEntry& e = report.entries[*report.chosen];
        char buf[160];
        std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"6\" fill=\"#cc3333\"/>\n",
                      canvas.px(e.sigma), canvas.py(e.sync));
        svg << buf;
    }
    svg << "</svg>\n";
    open_out(path) << svg.str();
}

std::vector<std::string> dataset_ids(const Dataset& data) {
    std::vector<std::string> ids;
    for (const Curve& c : data) ids.push_back(c.id);
    return ids;
}

} // namespace

void write_run_config(const std::string& path, const RunConfig& config) {
    std::ofstream out = open_out(path);
    out << "command=" << config.command << "\n";
    out << "input=" << config.input << "\n";
    out << "method=" << config.method << "\n";
    out << "features=" << config.features << "\n";
    out << "warp=" << config.warp << "\n";
    out << "landmarks=" << config.landmarks << "\n";
    out << "format=" << config.format << "\n";
    out << "plots=" << (config.plots ? "1" : "0") << "\n";
    out << "lambda-sync=" << format_double(config.fit.lambdas.sync) << "\n";
    out << "lambda-mom=" << format_double(config.fit.lambdas.mom) << "\n";
    out << "lambda-w=" << format_double(config.fit.lambdas.w) << "\n";
    out << "amp-dim=" << config.fit.amp_dim << "\n";
    out << "warp-dim=" << config.fit.warp_dim << "\n";
    out << "amp-degree=" << config.fit.amp_degree << "\n";
    out << "warp-degree=" << config.fit.warp_degree << "\n";
    out << "smooth-roughness=" << format_double(config.fit.smooth_roughness) << "\n";
    out << "max-outer=" << config.fit.max_outer_iters << "\n";
    out << "outer-tol=" << format_double(config.fit.outer_tol) << "\n";
    out << "inner-max=" << config.fit.inner.max_iterations << "\n";
    out << "inner-tol=" << format_double(config.fit.inner.grad_tol) << "\n";
    out << "quad-points=" << config.fit.quad_points << "\n";
    out << "output-points=" << config.fit.output_points << "\n";
    out << "exec=" << (config.fit.exec == ExecMode::serial ? "serial" : "openmp") << "\n";
    if (config.fit.anneal) {
        out << "anneal=" << config.fit.anneal->phase1_iters << ","
            << format_double(config.fit.anneal->mom_multiplier) << ","
            << format_double(config.fit.anneal->sync_multiplier) << "\n";
    }
    if (config.fit.domain) {
        out << "domain=" << format_double(config.fit.domain->first) << ":"
            << format_double(config.fit.domain->second) << "\n";
    }
    auto join = [](const std::vector<double>& values) {
        std::string s;
        for (size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + format_double(values[i]);
        return s;
    };
    out << "grid-sync=" << join(config.grid.sync_values) << "\n";
    out << "grid-mom=" << join(config.grid.mom_values) << "\n";
    out << "grid-w=" << join(config.grid.w_values) << "\n";
    out << "sigma-max=" << format_double(config.grid.sigma_max) << "\n";
    out << "pw-max=" << format_double(config.grid.pw_max) << "\n";
    out << "scenario=" << scenario_kind_name(config.scenario.kind) << "\n";
    out << "n-curves=" << config.scenario.n_curves << "\n";
    out << "n-points=" << config.scenario.n_points << "\n";
    out << "seed=" << config.seed << "\n";
}

RunConfig read_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io_parse, "cannot open '" + path + "'");
    RunConfig config;
    config.grid = TuningGrid::defaults();
    std::string line;
    auto parse_list = [](const std::string& text) {
        std::vector<double> values;
        std::string item;
        std::istringstream stream(text);
        while (std::getline(stream, item, ',')) {
            double v;
            if (!parse_double(item, v)) throw Error(errc::io_parse, "bad number '" + item + "'");
            values.push_back(v);
        }
        return values;
    };
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(errc::io_parse, path + ": bad line '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        double num = 0.0;
        if (key == "command") config.command = val;
        else if (key == "input") config.input = val;
        else if (key == "method") config.method = val;
        else if (key == "features") config.features = val;
        else if (key == "warp") config.warp = val;
        else if (key == "landmarks") config.landmarks = val;
        else if (key == "format") config.format = val;
        else if (key == "plots") config.plots = val == "1" || val == "true";
        else if (key == "lambda-sync" && parse_double(val, num)) config.fit.lambdas.sync = num;
        else if (key == "lambda-mom" && parse_double(val, num)) config.fit.lambdas.mom = num;
        else if (key == "lambda-w" && parse_double(val, num)) config.fit.lambdas.w = num;
        else if (key == "amp-dim") config.fit.amp_dim = std::stoi(val);
        else if (key == "warp-dim") config.fit.warp_dim = std::stoi(val);
        else if (key == "amp-degree") config.fit.amp_degree = std::stoi(val);
        else if (key == "warp-degree") config.fit.warp_degree = std::stoi(val);
        else if (key == "smooth-roughness" && parse_double(val, num)) config.fit.smooth_roughness = num;
        else if (key == "max-outer") config.fit.max_outer_iters = std::stoi(val);
        else if (key == "outer-tol" && parse_double(val, num)) config.fit.outer_tol = num;
        else if (key == "inner-max") config.fit.inner.max_iterations = std::stoi(val);
        else if (key == "inner-tol" && parse_double(val, num)) config.fit.inner.grad_tol = num;
        else if (key == "quad-points") config.fit.quad_points = std::stoi(val);
        else if (key == "output-points") config.fit.output_points = std::stoi(val);
        else if (key == "exec") config.fit.exec = val == "serial" ? ExecMode::serial : ExecMode::openmp;
        else if (key == "anneal") {
            const auto parts = parse_list(val);
            if (parts.size() != 3) throw Error(errc::io_parse, "anneal needs iters,mom_mult,sync_mult");
            config.fit.anneal = AnnealSchedule{static_cast<int>(parts[0]), parts[1], parts[2]};
        } else if (key == "domain") {
            const auto colon = val.find(':');
            double lo, hi;
            if (colon == std::string::npos || !parse_double(val.substr(0, colon), lo) ||
                !parse_double(val.substr(colon + 1), hi)) {
                throw Error(errc::io_parse, "domain needs t0:t1");
            }
            config.fit.domain = {lo, hi};
        } else if (key == "grid-sync") config.grid.sync_values = parse_list(val);
        else if (key == "grid-mom") config.grid.mom_values = parse_list(val);
        else if (key == "grid-w") config.grid.w_values = parse_list(val);
        else if (key == "sigma-max" && parse_double(val, num)) config.grid.sigma_max = num;
        else if (key == "pw-max" && parse_double(val, num)) config.grid.pw_max = num;
        else if (key == "scenario") config.scenario.kind = parse_scenario_kind(val);
        else if (key == "n-curves") config.scenario.n_curves = std::stoi(val);
        else if (key == "n-points") config.scenario.n_points = std::stoi(val);
        else if (key == "seed") config.seed = std::stoull(val);
        else throw Error(errc::io_parse, path + ": unknown key '" + key + "'");
    }
    return config;
}

namespace {

void write_params_csv(const std::string& path, const Dataset& data, const FitResult& result) {
    std::ofstream out = open_out(path);
    out << "curve,block,index,value\n";
    auto emit = [&](const std::string& curve, const std::string& block, int index, double value) {
        out << curve << "," << block << "," << index << "," << format_double(value) << "\n";
    };
    for (size_t i = 0; i < data.size(); ++i) {
        const CurveParams& p = result.params[i];
        for (int k = 0; k < p.theta.size(); ++k) emit(data[i].id, "theta", k, p.theta(k));
        switch (p.warp.family) {
            case WarpFamily::identity: break;
            case WarpFamily::linear:
                emit(data[i].id, "alpha", 0, p.warp.alpha);
                emit(data[i].id, "beta", 0, p.warp.beta);
                break;
            case WarpFamily::free_form:
                emit(data[i].id, "gamma0", 0, p.warp.gamma0);
                [[fallthrough]];
            case WarpFamily::standardized:
                for (int k = 0; k < p.warp.gamma.size(); ++k) emit(data[i].id, "gamma", k, p.warp.gamma(k));
                break;
        }
    }
    for (int k = 0; k < result.mu_theta.size(); ++k) emit("mu_theta", "theta", k, result.mu_theta(k));
}

void write_metrics_txt(const std::string& path, const FitResult& result, const std::string& method) {
    std::ofstream out = open_out(path);
    out << "method = " << method << "\n";
    out << "sync = " << format_double(result.metrics.sync) << "\n";
    out << "sigma = " << format_double(result.metrics.sigma) << "\n";
    out << "sigma_convention = " << result.metrics.sigma_convention << "\n";
    out << "mean_pw = " << format_double(result.metrics.mean_pw) << "\n";
    out << "converged = " << (result.converged ? "true" : "false") << "\n";
    out << "q_trace =";
    for (double q : result.q_trace) out << " " << format_double(q);
    out << "\n";
    if (!result.converged && !result.q_trace.empty()) {
        out << "warning: outer loop stopped at the iteration cap\n";
    }
}

} // namespace

void write_fit_artifacts(const std::string& out_dir, const RunConfig& config, const Dataset& data,
                         const FitResult& result) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto ids = dataset_ids(data);
    write_grid_csv(out_dir + "/synchronized_curves.csv", "t", result.out_grid, result.synchronized_, ids);
    write_grid_csv(out_dir + "/warps.csv", "t", result.out_grid, result.warps, ids);
    write_params_csv(out_dir + "/params.csv", data, result);
    write_metrics_txt(out_dir + "/metrics.txt", result, config.method);
    write_run_config(out_dir + "/config.txt", config);
    if (config.plots) {
        write_fit_svg(out_dir + "/report.svg", result.out_grid, result.smoothed, result.synchronized_);
    }
}

void write_tuning_artifacts(const std::string& out_dir, const RunConfig& config,
                            const TuningReport& report) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream out = open_out(out_dir + "/tuning_report.csv");
    out << "lambda_sync,lambda_mom,lambda_w,sync,sigma,mean_pw,feasible,chosen\n";
    for (size_t i = 0; i < report.entries.size(); ++i) {
        const TuningEntry& e = report.entries[i];
        out << format_double(e.lambdas.sync) << "," << format_double(e.lambdas.mom) << ","
            << format_double(e.lambdas.w) << "," << format_double(e.sync) << ","
            << format_double(e.sigma) << "," << format_double(e.mean_pw) << ","
            << (e.feasible ? 1 : 0) << "," << (report.chosen && *report.chosen == static_cast<int>(i) ? 1 : 0)
            << "\n";
    }
    out.close();

    std::ofstream frontier = open_out(out_dir + "/frontier.csv");
    frontier << "sigma,sync\n";
    for (int idx : report.pareto) {
        frontier << format_double(report.entries[idx].sigma) << ","
                 << format_double(report.entries[idx].sync) << "\n";
    }
    frontier.close();

    if (config.plots) write_frontier_svg(out_dir + "/report.svg", report);
}

namespace {

FitConfig resolve_fit_config(const RunConfig& config, const Dataset& data) {
    FitConfig fit = config.fit;
    fit.family = parse_warp_family(config.warp);
    fit.specs = parse_moment_specs(config.features);
    if (!fit.domain) {
        const auto [t0, t1] = dataset_span(data);
        fit.domain = {t0, t1};
    }
    return fit;
}

FitResult run_method(const RunConfig& config, const Dataset& data, const FitConfig& fit) {
    if (config.method == "moments") return register_curves(data, fit);
    if (config.method == "cmr") return cmr_register(data, fit);
    if (config.method == "landmark") {
        const LandmarkSpec spec = LandmarkSpec::parse(config.landmarks, fit.smooth_roughness);
        return landmark_register(data, spec, fit.family, fit);
    }
    throw Error(errc::bad_config, "unknown method '" + config.method + "'");
}

} // namespace

StoredParams read_params_csv(const std::string& path, const FitConfig& fit, double t0, double t1) {
    const auto rows = read_csv_rows(path);
    if (rows.empty()) throw Error(errc::io_parse, path + ": empty");
    const BSplineBasis warp_basis(t0, t1, fit.warp_dim, fit.warp_degree);
    StoredParams stored;
    std::vector<std::string> order;
    std::map<std::string, std::map<std::string, std::map<int, double>>> table;
    for (size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].empty()) continue;
        if (rows[r].size() != 4) throw Error(errc::io_parse, path + ":" + std::to_string(r + 1));
        double v;
        if (!parse_double(rows[r][3], v)) throw Error(errc::io_parse, path + ": non-numeric value");
        if (!table.count(rows[r][0])) order.push_back(rows[r][0]);
        table[rows[r][0]][rows[r][1]][std::stoi(rows[r][2])] = v;
    }
    auto to_vector = [](const std::map<int, double>& m) {
        Eigen::VectorXd v(m.size());
        for (const auto& [k, val] : m) v(k) = val;
        return v;
    };
    for (const std::string& id : order) {
        auto& blocks = table[id];
        if (id == "mu_theta") {
            stored.mu_theta = to_vector(blocks["theta"]);
            continue;
        }
        CurveParams p;
        p.theta = to_vector(blocks["theta"]);
        switch (fit.family) {
            case WarpFamily::identity: p.warp = WarpModel::identity_warp(); break;
            case WarpFamily::linear:
                p.warp = WarpModel::linear(blocks["alpha"][0], blocks["beta"][0]);
                break;
            case WarpFamily::free_form:
                p.warp = WarpModel::free_form_warp(warp_basis, blocks["gamma0"][0],
                                                   to_vector(blocks["gamma"]));
                break;
            case WarpFamily::standardized:
                p.warp = WarpModel::standardized_warp(warp_basis, to_vector(blocks["gamma"]));
                break;
        }
        stored.params.push_back(std::move(p));
    }
    return stored;
}

RecomputedMetrics recompute_metrics(const std::string& out_dir, const std::string& input_csv) {
    const RunConfig config = read_run_config(out_dir + "/config.txt");
    const std::string input = input_csv.empty() ? config.input : input_csv;
    const Dataset data = load_curves(input, parse_csv_format(config.format));

    FitConfig fit = config.fit;
    fit.family = parse_warp_family(config.warp);
    if (!fit.domain) {
        const auto [t0, t1] = dataset_span(data);
        fit.domain = {t0, t1};
    }
    const auto [t0, t1] = *fit.domain;
    const BSplineBasis amp_basis(t0, t1, fit.amp_dim, fit.amp_degree);
    const QuadGrid grid(t0, t1, fit.quad_points > 0 ? fit.quad_points : QuadGrid::default_points());

    const GridCsv z_csv = read_grid_csv(out_dir + "/synchronized_curves.csv");
    const StoredParams stored = read_params_csv(out_dir + "/params.csv", fit, t0, t1);
    if (stored.params.size() != data.size()) {
        throw Error(errc::dimension_mismatch, "params.csv curve count vs input dataset");
    }

    RecomputedMetrics out;

    // Smoothed originals on the emitted grid.
    Eigen::MatrixXd smoothed(z_csv.grid.size(), static_cast<int>(data.size()));
    std::vector<Eigen::VectorXd> presmooth(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        presmooth[i] = smooth_fit(data[i], amp_basis, fit.smooth_roughness);
        for (int r = 0; r < z_csv.grid.size(); ++r) {
            smoothed(r, static_cast<int>(i)) = amp_basis.value(presmooth[i], z_csv.grid(r), 0);
        }
    }
    out.metrics.sync = data.size() >= 2 ? sync_metric(smoothed, z_csv.columns) : 0.0;

    // Sigma per the recorded convention.
    std::string convention = "fit";
    {
        std::ifstream metrics_in(out_dir + "/metrics.txt");
        std::string line;
        while (metrics_in && std::getline(metrics_in, line)) {
            if (line.rfind("sigma_convention = ", 0) == 0) convention = trim(line.substr(19));
        }
    }
    out.metrics.sigma_convention = convention;
    std::vector<Eigen::VectorXd> fitted(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        if (convention == "presmooth") {
            Eigen::VectorXd v(data[i].size());
            for (int j = 0; j < data[i].size(); ++j) {
                v(j) = amp_basis.value(presmooth[i], data[i].times(j), 0);
            }
            fitted[i] = v;
        } else {
            fitted[i] = fitted_values(stored.params[i], data[i], amp_basis, grid);
        }
    }
    out.metrics.sigma = sigma_metric(data, fitted);

    double pw = 0.0;
    for (const CurveParams& p : stored.params) pw += WarpEvaluator(p.warp, grid).penalty();
    out.metrics.mean_pw = pw / static_cast<double>(data.size());

    // Consistency against the recorded metrics.
    std::ifstream metrics_in(out_dir + "/metrics.txt");
    std::string line;
    while (metrics_in && std::getline(metrics_in, line)) {
        double recorded;
        if (line.rfind("sync = ", 0) == 0 && parse_double(trim(line.substr(7)), recorded)) {
            if (std::abs(recorded - out.metrics.sync) > 1e-9 * std::max(1.0, std::abs(recorded))) {
                out.consistent = false;
            }
        } else if (line.rfind("sigma = ", 0) == 0 && parse_double(trim(line.substr(8)), recorded)) {
            if (std::abs(recorded - out.metrics.sigma) > 1e-9 * std::max(1.0, std::abs(recorded))) {
                out.consistent = false;
            }
        } else if (line.rfind("mean_pw = ", 0) == 0 && parse_double(trim(line.substr(10)), recorded)) {
            if (std::abs(recorded - out.metrics.mean_pw) > 1e-9 * std::max(1.0, std::abs(recorded))) {
                out.consistent = false;
            }
        }
    }
    return out;
}

void run(const RunConfig& config) {
    namespace fs = std::filesystem;
    if (config.command == "simulate") {
        Scenario scenario = config.scenario;
        scenario.seed = config.seed;
        const SimOutput sim = simulate(scenario);
        fs::create_directories(config.out_dir);
        save_curves(config.out_dir + "/curves.csv", sim.data);

        const QuadGrid grid(0.0, 1.0, 201);
        Eigen::MatrixXd warps(sim.ref_grid.size(), static_cast<int>(sim.true_warps.size()));
        for (size_t i = 0; i < sim.true_warps.size(); ++i) {
            const WarpEvaluator warp(sim.true_warps[i], grid);
            for (int r = 0; r < sim.ref_grid.size(); ++r) {
                warps(r, static_cast<int>(i)) = warp.eval(sim.ref_grid(r));
            }
        }
        write_grid_csv(config.out_dir + "/truth_warps.csv", "t", sim.ref_grid, warps,
                       dataset_ids(sim.data));
        write_grid_csv(config.out_dir + "/truth_reference.csv", "t", sim.ref_grid, sim.ref_values,
                       {"reference"});
        RunConfig echo = config;
        echo.scenario = scenario;
        write_run_config(config.out_dir + "/config.txt", echo);
        return;
    }

    if (config.command == "metrics") {
        const RecomputedMetrics m = recompute_metrics(config.out_dir, config.input);
        std::printf("sync = %.17g\n", m.metrics.sync);
        std::printf("sigma = %.17g\n", m.metrics.sigma);
        std::printf("sigma_convention = %s\n", m.metrics.sigma_convention.c_str());
        std::printf("mean_pw = %.17g\n", m.metrics.mean_pw);
        std::printf("consistent = %s\n", m.consistent ? "true" : "false");
        return;
    }

    const Dataset data = load_curves(config.input, parse_csv_format(config.format));
    FitConfig fit = resolve_fit_config(config, data);
    RunConfig resolved = config;
    resolved.fit = fit;

    if (config.command == "fit" || config.command == "baseline") {
        const FitResult result = run_method(resolved, data, fit);
        write_fit_artifacts(config.out_dir, resolved, data, result);
        return;
    }
    if (config.command == "tune") {
        const TuningReport report = grid_search(data, config.grid, fit);
        write_tuning_artifacts(config.out_dir, resolved, report);
        if (report.chosen) {
            FitConfig best = fit;
            best.lambdas = report.entries[*report.chosen].lambdas;
            RunConfig best_config = resolved;
            best_config.fit = best;
            const FitResult result = register_curves(data, best);
            write_fit_artifacts(config.out_dir, best_config, data, result);
        }
        return;
    }
    throw Error(errc::bad_config, "unknown command '" + config.command + "'");
}

} // namespace align
