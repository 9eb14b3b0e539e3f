#pragma once

// Presentation of z-matrices and derived quantities: fixed-width text tables
// (transposed, scaled, small values suppressed), rectangle-histogram matrix
// plots, CDF/density charts, labeled scatter plots, and full-precision CSV.
// Output is a pure function of the inputs; re-rendering is byte-identical.

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zmx/simtest.hpp"
#include "zmx/zmatrix.hpp"

namespace zmx {

struct TableOptions {
    bool transpose = true;          // print z^T: compare estimates down columns
    double scale = 1000.0;          // power of 10 applied before display
    double suppress_below = 1.0;    // threshold on the scaled value
    bool post_round_suppress = false;  // apply the threshold after rounding
    std::string label_covariate;    // covariate used for row/column labels
};

/// Round half to even, the tie rule used for printed cells.
inline long long round_half_even(double v) {
    const double f = std::floor(v);
    const double diff = v - f;
    auto lo = static_cast<long long>(f);
    if (diff > 0.5) return lo + 1;
    if (diff < 0.5) return lo;
    return (lo % 2 == 0) ? lo : lo + 1;
}

/// Scaled, rounded cell value, or nullopt when suppressed.
inline std::optional<long long> scaled_cell(double value, const TableOptions& opts) {
    const double scaled = value * opts.scale;
    const long long rounded = round_half_even(scaled);
    const double tested = opts.post_round_suppress ? static_cast<double>(rounded) : scaled;
    if (tested < opts.suppress_below) return std::nullopt;
    return rounded;
}

/// All cells of the rendered table in display orientation: cells[r][c] shows
/// entry (c, r) of z when transposed, (r, c) otherwise.
inline std::vector<std::vector<std::optional<long long>>> scaled_cells(const ZMatrix& z,
                                                                       const TableOptions& opts) {
    const std::size_t n = z.n();
    std::vector<std::vector<std::optional<long long>>> cells(
        n, std::vector<std::optional<long long>>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double v = opts.transpose ? z.entries[c][r] : z.entries[r][c];
            cells[r][c] = scaled_cell(v, opts);
        }
    return cells;
}

inline std::string thousands(long long v) {
    std::string digits = std::to_string(v);
    std::string out;
    int count = 0;
    for (std::size_t i = digits.size(); i-- > 0;) {
        out.insert(out.begin(), digits[i]);
        if (++count % 3 == 0 && i > 0 && digits[i - 1] != '-') out.insert(out.begin(), ',');
    }
    return out;
}

inline std::string format_number(double v) {
    char buf[64];
    if (v == std::floor(v) && std::abs(v) < 1e15)
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
    else
        std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string table_text(const ZMatrix& z, const TableOptions& opts) {
    const std::size_t n = z.n();
    const auto cells = scaled_cells(z, opts);
    const bool labeled = !opts.label_covariate.empty();

    std::vector<std::string> labels(n);
    if (labeled)
        for (std::size_t i = 0; i < n; ++i) {
            auto it = z.covariates[i].find(opts.label_covariate);
            if (it == z.covariates[i].end())
                throw std::invalid_argument("unit " + z.order[i] + ": no covariate named '" +
                                            opts.label_covariate + "'");
            labels[i] = format_number(it->second);
        }

    std::vector<std::string> text(n * n);
    std::vector<std::size_t> width(n, 0);
    for (std::size_t c = 0; c < n; ++c) {
        if (labeled) width[c] = labels[c].size();
        for (std::size_t r = 0; r < n; ++r) {
            std::string& s = text[r * n + c];
            if (cells[r][c]) s = thousands(*cells[r][c]);
            width[c] = std::max(width[c], s.size());
        }
    }
    std::size_t label_width = labeled ? opts.label_covariate.size() : 0;
    for (std::size_t r = 0; labeled && r < n; ++r) label_width = std::max(label_width, labels[r].size());

    auto pad_left = [](const std::string& s, std::size_t w) {
        return std::string(w - s.size(), ' ') + s;
    };

    std::string out;
    if (labeled) {
        std::string line = pad_left(opts.label_covariate, label_width);
        for (std::size_t c = 0; c < n; ++c) line += "  " + pad_left(labels[c], width[c]);
        out += line;
        out += '\n';
    }
    for (std::size_t r = 0; r < n; ++r) {
        std::string line = labeled ? pad_left(labels[r], label_width) : std::string();
        for (std::size_t c = 0; c < n; ++c) {
            if (labeled || c > 0) line += "  ";
            line += pad_left(text[r * n + c], width[c]);
        }
        // suppressed tails leave no trailing padding
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line;
        out += '\n';
    }
    return out;
}

/// Full-precision CSV of the matrix, unsuppressed, with unit ids.
inline std::string matrix_csv(const ZMatrix& z) {
    std::string out = "unit_id";
    for (const auto& id : z.order) out += "," + id;
    out += '\n';
    char buf[64];
    for (std::size_t i = 0; i < z.n(); ++i) {
        out += z.order[i];
        for (std::size_t j = 0; j < z.n(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", z.entries[i][j]);
            out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

namespace svgdetail {

inline std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string open_svg(double w, double h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" +
           num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n";
}

inline std::string rect(double x, double y, double w, double h, const std::string& fill) {
    return "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
           num(h) + "\" fill=\"" + fill + "\"/>\n";
}

inline std::string line(double x1, double y1, double x2, double y2, const std::string& stroke,
                        double width = 1.0) {
    return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
           num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, int size = 10,
                        const std::string& anchor = "start") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" +
           std::to_string(size) + "\" font-family=\"monospace\" text-anchor=\"" + anchor + "\">" +
           s + "</text>\n";
}

struct AxisScale {
    double lo = 0.0, hi = 1.0, px0 = 0.0, px1 = 1.0;
    double operator()(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

inline AxisScale make_scale(double lo, double hi, double px0, double px1) {
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    return AxisScale{lo, hi, px0, px1};
}

/// One matrix panel: centered squares with area proportional to the entries.
inline std::string matrix_panel(const ZMatrix& z, double x0, double y0, double panel) {
    const std::size_t n = z.n();
    const double cell = panel / static_cast<double>(n);
    std::string out;
    out += rect(x0, y0, panel, panel, "white");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = z.entries[i][j];
            if (v <= 0.0) continue;
            const double side = cell * std::sqrt(v);
            const double cx = x0 + (static_cast<double>(j) + 0.5) * cell;
            const double cy = y0 + (static_cast<double>(i) + 0.5) * cell;
            out += rect(cx - side / 2.0, cy - side / 2.0, side, side, "#30475e");
        }
    out += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(panel) +
           "\" height=\"" + num(panel) + "\" fill=\"none\" stroke=\"#888\"/>\n";
    return out;
}

}  // namespace svgdetail

/// Rectangle-histogram plot of the (untransposed) matrix: every row is a
/// histogram with unit total area, so concentrated rows stand out.
inline std::string symbols_svg(const ZMatrix& z) {
    const double panel = 18.0 * static_cast<double>(z.n());
    const double margin = 10.0;
    std::string out = svgdetail::open_svg(panel + 2 * margin, panel + 2 * margin);
    out += svgdetail::matrix_panel(z, margin, margin, panel);
    out += "</svg>\n";
    return out;
}

/// Two stacked panels: (a) the distribution function of the estimates under
/// the column-sum weights, (b) the weights themselves as spikes.
inline std::string cdf_density_svg(const std::vector<double>& density,
                                   const std::vector<double>& cdf,
                                   const std::vector<double>& estimates, bool log10_x) {
    const std::size_t n = estimates.size();
    if (n < 2 || density.size() != n || cdf.size() != n)
        throw std::invalid_argument("cdf_density_svg: need aligned vectors with n >= 2");

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (log10_x && !(estimates[i] > 0.0))
            throw std::invalid_argument("cdf_density_svg: log axis needs positive estimates");
        x[i] = log10_x ? std::log10(estimates[i]) : estimates[i];
    }

    const double w = 480.0, panel_h = 170.0, pad = 40.0;
    const double h = 2 * panel_h + 3 * pad;
    auto xs = svgdetail::make_scale(*std::min_element(x.begin(), x.end()),
                                    *std::max_element(x.begin(), x.end()), pad, w - pad);
    double dmax = 0.0;
    for (double d : density) dmax = std::max(dmax, d);

    std::string out = svgdetail::open_svg(w, h);
    // panel (a): step plot of the distribution function
    auto ya = svgdetail::make_scale(0.0, 1.0, pad + panel_h, pad);
    out += svgdetail::line(pad, ya(0.0), w - pad, ya(0.0), "#444");
    out += svgdetail::line(pad, ya(0.0), pad, ya(1.0), "#444");
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out += svgdetail::line(xs(x[i]), ya(prev), xs(x[i]), ya(cdf[i]), "#c0392b", 1.5);
        if (i + 1 < n) out += svgdetail::line(xs(x[i]), ya(cdf[i]), xs(x[i + 1]), ya(cdf[i]), "#c0392b", 1.5);
        prev = cdf[i];
    }
    out += svgdetail::text(pad, pad - 8, "(a) distribution function");

    // panel (b): density spikes
    auto yb = svgdetail::make_scale(0.0, dmax, h - pad, h - pad - panel_h);
    out += svgdetail::line(pad, yb(0.0), w - pad, yb(0.0), "#444");
    out += svgdetail::line(pad, yb(0.0), pad, yb(dmax), "#444");
    for (std::size_t i = 0; i < n; ++i)
        out += svgdetail::line(xs(x[i]), yb(0.0), xs(x[i]), yb(density[i]), "#2c3e50", 2.0);
    out += svgdetail::text(pad, h - pad - panel_h - 8, "(b) column-sum weights");
    out += svgdetail::text(w / 2.0, h - 8, log10_x ? "estimate (log10)" : "estimate", 10, "middle");
    out += "</svg>\n";
    return out;
}

/// Scatter plot with the point markers drawn as label glyphs.
inline std::string scatter_svg(const std::vector<double>& x, const std::vector<double>& y,
                               const std::vector<std::string>& labels, bool log10_x,
                               const std::string& x_name = "x", const std::string& y_name = "y") {
    if (x.size() != y.size() || x.size() != labels.size())
        throw std::invalid_argument("scatter_svg: length mismatch");

    const double w = 480.0, h = 360.0, pad = 40.0;
    std::string out = svgdetail::open_svg(w, h);
    out += svgdetail::line(pad, h - pad, w - pad, h - pad, "#444");
    out += svgdetail::line(pad, h - pad, pad, pad, "#444");
    out += svgdetail::text(w / 2.0, h - 8, log10_x ? x_name + " (log10)" : x_name, 10, "middle");
    out += svgdetail::text(12, pad - 10, y_name);

    if (!x.empty()) {
        std::vector<double> xv(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (log10_x && !(x[i] > 0.0))
                throw std::invalid_argument("scatter_svg: log axis needs positive x");
            xv[i] = log10_x ? std::log10(x[i]) : x[i];
        }
        auto xs = svgdetail::make_scale(*std::min_element(xv.begin(), xv.end()),
                                        *std::max_element(xv.begin(), xv.end()), pad + 10, w - pad - 10);
        auto ys = svgdetail::make_scale(*std::min_element(y.begin(), y.end()),
                                        *std::max_element(y.begin(), y.end()), h - pad - 10, pad + 10);
        for (std::size_t i = 0; i < x.size(); ++i)
            out += svgdetail::text(xs(xv[i]), ys(y[i]) + 4, labels[i], 11, "middle");
    }
    out += "</svg>\n";
    return out;
}

/// The lineup: observed and simulated matrices tiled per the layout, panels
/// numbered but otherwise indistinguishable.
inline std::string lineup_svg(const ZMatrix& observed, const std::vector<ZMatrix>& sims,
                              const LineupLayout& layout) {
    const double panel = 180.0, gap = 24.0;
    const double w = gap + (panel + gap) * layout.cols;
    const double h = gap + (panel + gap) * layout.rows;
    std::string out = svgdetail::open_svg(w, h);
    for (std::size_t p = 0; p < layout.panels.size(); ++p) {
        const int r = static_cast<int>(p) / layout.cols;
        const int c = static_cast<int>(p) % layout.cols;
        const double x0 = gap + c * (panel + gap);
        const double y0 = gap + r * (panel + gap);
        const int which = layout.panels[p];
        const ZMatrix& z = which == 0 ? observed : sims[static_cast<std::size_t>(which - 1)];
        out += svgdetail::matrix_panel(z, x0, y0, panel);
        out += svgdetail::text(x0 + panel / 2.0, y0 + panel + 14, std::to_string(p + 1), 10,
                               "middle");
    }
    out += "</svg>\n";
    return out;
}

}  // namespace zmx
