#pragma once

// Minimal SVG plotting for run outputs: bar charts, line plots (linear or log y),
// and heat maps. Output text depends only on the input data.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "optosync/io.hpp"

namespace optosync::svg {

namespace fs = std::filesystem;

class RenderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string num(double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", x);
    return b;
}

inline std::string label_num(double x) {
    char b[32];
    if (x != 0 && (std::abs(x) < 1e-3 || std::abs(x) >= 1e4))
        std::snprintf(b, sizeof b, "%.0e", x);
    else
        std::snprintf(b, sizeof b, "%.3g", x);
    return b;
}

inline std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

struct Series {
    std::vector<double> x, y, err;
    std::string label;
    std::string color = "#1f77b4";
    bool markers = true;
    bool line = true;
};

/// One panel with axes. Data coordinates map into a fixed 640x420 canvas.
class Plot {
public:
    double width = 640, height = 420;
    double left = 70, right = 20, top = 40, bottom = 55;
    std::string title, xlabel, ylabel;
    bool log_y = false;

    void set_x(double lo, double hi) { x0_ = lo, x1_ = hi; }
    void set_y(double lo, double hi) { y0_ = lo, y1_ = hi; }

    double px(double x) const { return left + (x - x0_) / (x1_ - x0_) * (width - left - right); }
    double py(double y) const {
        double a = log_y ? std::log10(y) : y, b0 = log_y ? std::log10(y0_) : y0_, b1 = log_y ? std::log10(y1_) : y1_;
        return height - bottom - (a - b0) / (b1 - b0) * (height - top - bottom);
    }

    void add(const std::string& element) { body_ += element + "\n"; }

    void bars(const std::vector<double>& edges, const std::vector<double>& h, const std::string& color) {
        for (std::size_t i = 0; i < h.size(); ++i) {
            double xa = px(edges[i]), xb = px(edges[i + 1]);
            double ya = py(h[i]), yb = py(y0_);
            add("<rect x=\"" + num(xa) + "\" y=\"" + num(ya) + "\" width=\"" + num(std::max(0.0, xb - xa - 0.5)) +
                "\" height=\"" + num(std::max(0.0, yb - ya)) + "\" fill=\"" + color + "\"/>");
        }
    }

    void series(const Series& s) {
        std::string pts;
        bool pen = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0)) {
                if (pen) flush_line(pts, s.color);
                pts.clear();
                pen = false;
                continue;
            }
            pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
            pen = true;
        }
        if (s.line && pen) flush_line(pts, s.color);
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0)) continue;
            if (!s.err.empty() && std::isfinite(s.err[i]) && s.err[i] > 0) {
                double lo = s.y[i] - s.err[i], hi = s.y[i] + s.err[i];
                if (log_y) lo = std::max(lo, y0_);
                add("<line x1=\"" + num(px(s.x[i])) + "\" y1=\"" + num(py(lo)) + "\" x2=\"" + num(px(s.x[i])) +
                    "\" y2=\"" + num(py(hi)) + "\" stroke=\"" + s.color + "\"/>");
            }
            if (s.markers)
                add("<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\" fill=\"" +
                    s.color + "\"/>");
        }
        if (!s.label.empty()) legend_.push_back({s.label, s.color});
    }

    std::string str() const {
        std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
                        num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) +
                        "\" font-family=\"sans-serif\" font-size=\"12\">\n";
        o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        o += body_;
        o += axes();
        return o + "</svg>\n";
    }

private:
    void flush_line(const std::string& pts, const std::string& color) {
        add("<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>");
    }

    std::vector<double> ticks_linear(double lo, double hi) const {
        double span = hi - lo;
        if (!(span > 0)) return {lo};
        double step = std::pow(10.0, std::floor(std::log10(span / 5)));
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (span / (step * m) <= 6) {
                step *= m;
                break;
            }
        std::vector<double> t;
        for (double v = std::ceil(lo / step - 1e-9) * step; v <= hi + 1e-9 * span; v += step)
            t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
        return t;
    }

    std::string axes() const {
        std::string o;
        double xl = left, xr = width - right, yt = top, yb = height - bottom;
        o += "<rect x=\"" + num(xl) + "\" y=\"" + num(yt) + "\" width=\"" + num(xr - xl) + "\" height=\"" +
             num(yb - yt) + "\" fill=\"none\" stroke=\"black\"/>\n";
        for (double t : ticks_linear(x0_, x1_)) {
            double x = px(t);
            o += "<line x1=\"" + num(x) + "\" y1=\"" + num(yb) + "\" x2=\"" + num(x) + "\" y2=\"" + num(yb + 5) +
                 "\" stroke=\"black\"/>\n";
            o += "<text x=\"" + num(x) + "\" y=\"" + num(yb + 18) + "\" text-anchor=\"middle\">" + label_num(t) +
                 "</text>\n";
        }
        std::vector<double> yt_vals;
        if (log_y) {
            for (double e = std::ceil(std::log10(y0_) - 1e-9); e <= std::log10(y1_) + 1e-9; e += 1.0)
                yt_vals.push_back(std::pow(10.0, e));
        } else {
            yt_vals = ticks_linear(y0_, y1_);
        }
        for (double t : yt_vals) {
            double y = py(t);
            o += "<line x1=\"" + num(xl - 5) + "\" y1=\"" + num(y) + "\" x2=\"" + num(xl) + "\" y2=\"" + num(y) +
                 "\" stroke=\"black\"/>\n";
            o += "<text x=\"" + num(xl - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + label_num(t) +
                 "</text>\n";
        }
        o += "<text x=\"" + num((xl + xr) / 2) + "\" y=\"" + num(height - 12) + "\" text-anchor=\"middle\">" +
             escape(xlabel) + "</text>\n";
        o += "<text transform=\"translate(16," + num((yt + yb) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
             escape(ylabel) + "</text>\n";
        o += "<text x=\"" + num((xl + xr) / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
             escape(title) + "</text>\n";
        double ly = yt + 16;
        for (const auto& [label, color] : legend_) {
            o += "<rect x=\"" + num(xr - 130) + "\" y=\"" + num(ly - 9) + "\" width=\"12\" height=\"12\" fill=\"" +
                 color + "\"/>\n";
            o += "<text x=\"" + num(xr - 112) + "\" y=\"" + num(ly + 1) + "\">" + escape(label) + "</text>\n";
            ly += 18;
        }
        return o;
    }

    double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
    std::string body_;
    std::vector<std::pair<std::string, std::string>> legend_;
};

inline std::pair<double, double> padded_range(const std::vector<double>& v, bool log = false) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double x : v)
        if (std::isfinite(x) && (!log || x > 0)) lo = std::min(lo, x), hi = std::max(hi, x);
    if (!std::isfinite(lo)) return log ? std::pair{1.0, 10.0} : std::pair{0.0, 1.0};
    if (log) {
        return {std::pow(10.0, std::floor(std::log10(lo))), std::pow(10.0, std::ceil(std::log10(hi) + 1e-12))};
    }
    if (hi == lo) return {lo - 0.5 * (std::abs(lo) + 1), hi + 0.5 * (std::abs(hi) + 1)};
    double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

// ------------------------------------------------------------ panels

inline std::string histogram_svg(const PhaseHistogram& h, const std::string& title) {
    if (h.bins() == 0) throw RenderError("empty histogram");
    Plot p;
    p.title = title;
    p.xlabel = "relative phase (rad)";
    p.ylabel = "probability density";
    p.set_x(h.edges.front(), h.edges.back());
    double top = *std::max_element(h.density.begin(), h.density.end());
    p.set_y(0.0, top > 0 ? 1.1 * top : 1.0);
    p.bars(h.edges, h.density, "#4c72b0");
    return p.str();
}

inline std::string trace_svg(const PhaseSeries& ps, const std::string& title, std::size_t max_points = 4000) {
    if (ps.size() == 0) throw RenderError("empty phase trace");
    Plot p;
    p.title = title;
    p.xlabel = "time (periods)";
    p.ylabel = "relative phase (rad)";
    std::size_t stride = std::max<std::size_t>(1, ps.size() / max_points);
    Series s;
    s.markers = true;
    s.line = false;
    for (std::size_t i = 0; i < ps.size(); i += stride) {
        if (!ps.defined[i]) continue;
        s.x.push_back(ps.times[i] / (2.0 * std::numbers::pi));
        s.y.push_back(ps.delta_phi[i]);
    }
    if (s.x.empty()) throw RenderError("phase undefined everywhere");
    p.set_x(s.x.front(), s.x.back() > s.x.front() ? s.x.back() : s.x.front() + 1);
    p.set_y(-std::numbers::pi, std::numbers::pi);
    s.color = "#333333";
    // Small dots for dense traces.
    for (std::size_t i = 0; i < s.x.size(); ++i)
        p.add("<circle cx=\"" + num(p.px(s.x[i])) + "\" cy=\"" + num(p.py(s.y[i])) + "\" r=\"0.8\" fill=\"#333333\"/>");
    return p.str();
}

inline std::string lines_svg(const std::vector<Series>& ss, const std::string& title, const std::string& xlabel,
                             const std::string& ylabel, bool log_y) {
    Plot p;
    p.title = title;
    p.xlabel = xlabel;
    p.ylabel = ylabel;
    p.log_y = log_y;
    std::vector<double> xs, ys;
    for (const auto& s : ss) {
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            ys.push_back(s.y[i]);
            if (!s.err.empty() && std::isfinite(s.err[i])) {
                ys.push_back(s.y[i] + s.err[i]);
                if (!log_y) ys.push_back(s.y[i] - s.err[i]);
            }
        }
    }
    auto [x0, x1] = padded_range(xs);
    auto [y0, y1] = padded_range(ys, log_y);
    p.set_x(x0, x1);
    p.set_y(y0, y1);
    for (const auto& s : ss) p.series(s);
    return p.str();
}

/// Diverging blue-white-red map of v in [lo, hi].
inline std::string diverging(double v, double lo, double hi) {
    if (!std::isfinite(v)) return "#bbbbbb";
    double f = hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.5;
    auto mix = [](double a, double b, double t) { return static_cast<int>(std::lround(a + (b - a) * t)); };
    int r, g, b;
    if (f < 0.5) {
        double t = f / 0.5;
        r = mix(33, 255, t), g = mix(102, 255, t), b = mix(172, 255, t);
    } else {
        double t = (f - 0.5) / 0.5;
        r = mix(255, 178, t), g = mix(255, 24, t), b = mix(255, 43, t);
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

inline std::string category_color(const std::string& label) {
    static const std::map<std::string, std::string> m{{"zero-sync", "#b2182b"}, {"pi-sync", "#2166ac"},
                                                      {"bistable", "#762a83"}, {"mixed", "#f4a582"},
                                                      {"drift", "#dddddd"},    {"1", "#1b7837"},
                                                      {"0", "#eeeeee"}};
    auto it = m.find(label);
    return it == m.end() ? "#999999" : it->second;
}

/// Heat map on the grid (x[i], y[j]); `value` holds numbers or, if `categories`, labels.
inline std::string heatmap_svg(const std::vector<double>& xs, const std::vector<double>& ys,
                               const std::vector<std::vector<std::string>>& value, bool categories,
                               const std::string& title, const std::string& xlabel, const std::string& ylabel,
                               double lo = -1.0, double hi = 1.0) {
    if (xs.empty() || ys.empty()) throw RenderError("empty grid");
    auto edges = [](const std::vector<double>& c) {
        std::vector<double> e(c.size() + 1);
        if (c.size() == 1) {
            double w = std::abs(c[0]) > 0 ? 0.1 * std::abs(c[0]) : 0.5;
            return std::vector<double>{c[0] - w, c[0] + w};
        }
        for (std::size_t i = 1; i < c.size(); ++i) e[i] = 0.5 * (c[i - 1] + c[i]);
        e[0] = c[0] - (e[1] - c[0]);
        e.back() = c.back() + (c.back() - e[c.size() - 1]);
        return e;
    };
    auto ex = edges(xs), ey = edges(ys);
    Plot p;
    p.title = title;
    p.xlabel = xlabel;
    p.ylabel = ylabel;
    p.right = 110;
    p.set_x(ex.front(), ex.back());
    p.set_y(ey.front(), ey.back());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) {
            const std::string& v = value[i][j];
            std::string color;
            if (categories) {
                color = category_color(v);
                seen.insert(v);
            } else {
                double d = std::numeric_limits<double>::quiet_NaN();
                try {
                    d = io::parse_double(v);
                } catch (const std::exception&) {
                }
                color = diverging(d, lo, hi);
            }
            double xa = p.px(ex[i]), xb = p.px(ex[i + 1]), ya = p.py(ey[j + 1]), yb = p.py(ey[j]);
            p.add("<rect x=\"" + num(xa) + "\" y=\"" + num(ya) + "\" width=\"" + num(xb - xa) + "\" height=\"" +
                  num(yb - ya) + "\" fill=\"" + color + "\"/>");
        }
    double lx = p.width - p.right + 12, ly = p.top + 10;
    if (categories) {
        for (const auto& c : seen) {
            p.add("<rect x=\"" + num(lx) + "\" y=\"" + num(ly) + "\" width=\"12\" height=\"12\" fill=\"" +
                  category_color(c) + "\"/>");
            p.add("<text x=\"" + num(lx + 16) + "\" y=\"" + num(ly + 10) + "\">" + escape(c) + "</text>");
            ly += 18;
        }
    } else {
        for (int k = 0; k <= 10; ++k) {
            double v = hi - (hi - lo) * k / 10.0;
            p.add("<rect x=\"" + num(lx) + "\" y=\"" + num(ly + 18 * k) + "\" width=\"16\" height=\"18\" fill=\"" +
                  diverging(v, lo, hi) + "\"/>");
            if (k % 5 == 0)
                p.add("<text x=\"" + num(lx + 20) + "\" y=\"" + num(ly + 18 * k + 12) + "\">" + label_num(v) + "</text>");
        }
    }
    return p.str();
}

// --------------------------------------------------------- directories

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline std::string axis_title(const std::string& name) {
    if (name == "quantum_parameter") return "g0/kappa";
    if (name == "coupling_k") return "K/Omega";
    if (name == "delta_omega") return "delta Omega";
    return name;
}

/// Figures for the summary table of a sweep.
inline std::vector<std::pair<std::string, std::string>> summary_figures(const io::Table& t) {
    std::vector<std::pair<std::string, std::string>> out;
    std::vector<std::string> axes;
    if (t.has("j")) {
        std::size_t ci = t.column("cell");
        axes = {t.header[ci + 3], t.header[ci + 4]};
    } else if (t.has("i")) {
        axes = {t.header[t.column("cell") + 2]};
    }
    auto ok_rows = [&] {
        std::vector<std::size_t> r;
        for (std::size_t i = 0; i < t.rows.size(); ++i)
            if (!t.has("status") || t.text(i, "status") == "ok") r.push_back(i);
        return r;
    }();
    auto col = [&](const std::string& name) {
        std::vector<double> v;
        for (auto i : ok_rows) v.push_back(t.number(i, name));
        return v;
    };
    if (axes.size() == 1) {
        const auto& a = axes[0];
        if (t.has("mean_cos")) {
            Series s;
            s.x = col(a);
            s.y = col("mean_cos");
            s.err = col("stderr_cos");
            s.label = "<cos>";
            out.push_back({"sync.svg", lines_svg({s}, "phase locking", axis_title(a), "<cos relative phase>", false)});
        }
        if (t.has("tau0") && t.has("tau_pi")) {
            Series s0, sp;
            s0.x = sp.x = col(a);
            s0.y = col("tau0");
            s0.err = col("tau0_se");
            sp.y = col("tau_pi");
            sp.err = col("tau_pi_se");
            s0.label = "tau_0";
            sp.label = "tau_pi";
            s0.color = "#b2182b";
            sp.color = "#2166ac";
            out.push_back({"residence.svg", lines_svg({s0, sp}, "mean residence times", axis_title(a),
                                                      "residence time (1/Omega)", true)});
        }
        for (const char* k : {"n_th_star", "oscillation_energy"})
            if (t.has(k)) {
                Series s;
                s.x = col(a);
                s.y = col(k);
                out.push_back({std::string(k) + ".svg", lines_svg({s}, k, axis_title(a), k, false)});
            }
        if (t.has("regime") && !t.has("mean_cos")) {
            std::vector<std::vector<std::string>> v;
            std::vector<double> xs;
            for (auto i : ok_rows) {
                xs.push_back(t.number(i, a));
                v.push_back({t.text(i, "regime")});
            }
            out.push_back({"regime.svg", heatmap_svg(xs, {0.0}, v, true, "regime", axis_title(a), "")});
        }
    } else if (axes.size() == 2) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            auto ii = static_cast<std::size_t>(t.number(i, "i")), jj = static_cast<std::size_t>(t.number(i, "j"));
            if (xs.size() <= ii) xs.resize(ii + 1, std::numeric_limits<double>::quiet_NaN());
            if (ys.size() <= jj) ys.resize(jj + 1, std::numeric_limits<double>::quiet_NaN());
            xs[ii] = t.number(i, axes[0]);
            ys[jj] = t.number(i, axes[1]);
        }
        for (double x : xs)
            if (!std::isfinite(x)) throw RenderError("summary.csv does not cover the grid");
        for (double y : ys)
            if (!std::isfinite(y)) throw RenderError("summary.csv does not cover the grid");
        auto grid = [&](const std::string& name) {
            std::vector<std::vector<std::string>> g(xs.size(), std::vector<std::string>(ys.size(), "nan"));
            for (std::size_t i = 0; i < t.rows.size(); ++i) {
                bool good = !t.has("status") || t.text(i, "status") == "ok";
                g[static_cast<std::size_t>(t.number(i, "i"))][static_cast<std::size_t>(t.number(i, "j"))] =
                    good ? t.text(i, name) : "failed";
            }
            return g;
        };
        if (t.has("mean_cos"))
            out.push_back({"map-mean_cos.svg", heatmap_svg(xs, ys, grid("mean_cos"), false, "<cos relative phase>",
                                                           axis_title(axes[0]), axis_title(axes[1]))});
        if (t.has("regime"))
            out.push_back({"map-regime.svg", heatmap_svg(xs, ys, grid("regime"), true, "regime",
                                                         axis_title(axes[0]), axis_title(axes[1]))});
        if (t.has("limit_cycle"))
            out.push_back({"map-limit_cycle.svg", heatmap_svg(xs, ys, grid("limit_cycle"), true, "self-oscillation",
                                                              axis_title(axes[0]), axis_title(axes[1]))});
    }
    return out;
}

/// Renders every recognized file under `dir` into `dir/figures`. Returns the files written.
inline std::vector<fs::path> render_directory(const fs::path& dir, std::size_t max_cell_figures = 64) {
    if (!fs::is_directory(dir)) throw RenderError("not a directory: " + dir.string());
    std::vector<fs::path> written;
    const fs::path figs = dir / "figures";
    auto emit = [&](const std::string& name, const std::string& content) {
        io::atomic_write(figs / name, content);
        written.push_back(figs / name);
    };
    bool any_input = false;
    if (fs::exists(dir / "summary.csv")) {
        any_input = true;
        for (auto& [n, c] : summary_figures(io::read_csv(dir / "summary.csv"))) emit(n, c);
    }
    std::vector<fs::path> files;
    for (const fs::path& d : {dir, dir / "cells"})
        if (fs::is_directory(d))
            for (const auto& e : fs::directory_iterator(d))
                if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::size_t hist = 0, traces = 0;
    for (const auto& f : files) {
        std::string n = f.filename().string();
        std::string stem = n.substr(0, n.find('.'));
        if (n == "histogram.csv" || ends_with(n, ".histogram.csv")) {
            any_input = true;
            if (hist++ < max_cell_figures)
                emit(n.substr(0, n.size() - 4) + ".svg", histogram_svg(io::read_histogram(f), stem + " histogram"));
        } else if (ends_with(n, ".trajectory_000.csv") || (n.rfind("trajectory", 0) == 0 && ends_with(n, ".csv"))) {
            any_input = true;
            if (traces++ < max_cell_figures) {
                auto lt = io::read_trajectory(f);
                emit(n.substr(0, n.size() - 4) + ".trace.svg",
                     trace_svg(relative_phase(lt.trajectory, 1e-12), stem + " relative phase"));
            }
        } else if (n == "phase.csv") {
            any_input = true;
            emit("phase.trace.svg", trace_svg(io::read_phase_trace(f), "relative phase"));
        } else if (ends_with(n, ".potential.csv") || n == "potential.csv") {
            any_input = true;
            io::Table t = io::read_csv(f);
            Series s;
            s.x = t.numbers("phi");
            s.y = t.numbers("u");
            s.markers = false;
            emit(n.substr(0, n.size() - 4) + ".svg", lines_svg({s}, stem + " potential", "relative phase (rad)", "U", false));
        } else if (ends_with(n, ".observables.csv")) {
            any_input = true;
            io::Table t = io::read_csv(f);
            Series b1, b2, c;
            b1.x = b2.x = c.x = t.numbers("t");
            b1.y = t.numbers("n_b1");
            b1.err = t.numbers("n_b1_se");
            b2.y = t.numbers("n_b2");
            b2.err = t.numbers("n_b2_se");
            b1.label = "n_b1";
            b2.label = "n_b2";
            b2.color = "#d62728";
            b1.markers = b2.markers = false;
            emit(stem + ".phonons.svg", lines_svg({b1, b2}, stem + " phonon numbers", "time (1/Omega)", "<b^dag b>", false));
            c.y = t.numbers("re_c");
            c.err = t.numbers("re_c_se");
            c.markers = false;
            c.label = "Re C";
            emit(stem + ".correlator.svg", lines_svg({c}, stem + " correlator", "time (1/Omega)", "Re C", false));
        }
    }
    if (!any_input) throw RenderError("no renderable result files in " + dir.string());
    return written;
}

}  // namespace optosync::svg
