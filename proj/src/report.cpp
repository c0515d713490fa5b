#include "greenpeel/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "greenpeel/errors.hpp"
#include "greenpeel/theory.hpp"

namespace greenpeel {

const char* const budget_footer =
    "N counts training solves: sketch, posterior, HS-estimate and near-field probes; evaluation solves are "
    "excluded. gamma_hat is a proxy for the data-quality factor (min Rayleigh quotient of the probe covariance "
    "over the dominant kernel modes, divided by its largest eigenvalue).";

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string quote(const std::string& s) {
    std::string flat = s;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    std::replace(flat.begin(), flat.end(), '\r', ' ');
    if (flat.find_first_of(",\"") == std::string::npos) return flat;
    std::string out = "\"";
    for (char c : flat) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

template <class T>
T parse_field(const std::string& s, const char* column, std::size_t line) {
    T v{};
    if constexpr (std::is_floating_point_v<T>) {
        if (s == "nan") return nan;
    }
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError("CSV line " + std::to_string(line) + ": column " + column + " has invalid value '" + s +
                          "'");
    return v;
}

double median(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
    if (v.empty()) return nan;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

bool usable(const SweepRow& r) { return r.note.empty() && std::isfinite(r.err_hs_rel) && r.err_hs_rel > 0.0; }

}  // namespace

void write_csv(std::ostream& out, const SweepResult& result) {
    out << csv_header << '\n';
    for (const SweepRow& r : result.rows) {
        out << r.n_train << ',' << number(r.target) << ',' << r.levels << ',' << number(r.err_hs_rel) << ','
            << number(r.err_op_rel) << ',' << number(r.sampled_err) << ',' << number(r.gamma_hat) << ',' << r.seed
            << ',' << number(r.wall_time) << ',' << quote(r.note) << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const SweepResult& result) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
    write_csv(out, result);
}

SweepResult read_csv(const std::filesystem::path& path, const std::string& variable) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open CSV '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != csv_header)
        throw FormatError("CSV header mismatch in '" + path.string() + "': expected '" + csv_header + "'");
    SweepResult result;
    result.variable = variable;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 10)
            throw FormatError("CSV line " + std::to_string(lineno) + ": expected 10 columns, found " +
                              std::to_string(f.size()));
        SweepRow r;
        r.n_train = parse_field<std::uint64_t>(f[0], "N_train", lineno);
        r.target = parse_field<double>(f[1], "target", lineno);
        r.levels = parse_field<int>(f[2], "L", lineno);
        r.err_hs_rel = parse_field<double>(f[3], "err_hs_rel", lineno);
        r.err_op_rel = parse_field<double>(f[4], "err_op_rel", lineno);
        r.sampled_err = parse_field<double>(f[5], "sampled_err", lineno);
        r.gamma_hat = parse_field<double>(f[6], "gamma_hat", lineno);
        r.seed = parse_field<std::uint64_t>(f[7], "seed", lineno);
        r.wall_time = parse_field<double>(f[8], "wall_time", lineno);
        r.note = f[9];
        result.rows.push_back(std::move(r));
    }
    return result;
}

std::vector<MedianRow> median_table(const SweepResult& result) {
    std::map<double, std::vector<const SweepRow*>> groups;
    for (const SweepRow& r : result.rows) groups[r.target].push_back(&r);
    std::vector<MedianRow> table;
    for (const auto& [target, rows] : groups) {
        MedianRow m;
        m.target = target;
        std::vector<double> n, hs, op, sampled;
        for (const SweepRow* r : rows) {
            if (!r->note.empty()) {
                ++m.failures;
                continue;
            }
            ++m.runs;
            n.push_back(static_cast<double>(r->n_train));
            hs.push_back(r->err_hs_rel);
            op.push_back(r->err_op_rel);
            sampled.push_back(r->sampled_err);
        }
        m.n_train = median(n);
        m.err_hs_rel = median(hs);
        m.err_op_rel = median(op);
        m.sampled_err = median(sampled);
        table.push_back(m);
    }
    return table;
}

std::string format_median_table(const std::vector<MedianRow>& table, const std::string& variable) {
    std::ostringstream out;
    out << std::left << std::setw(10) << variable << std::right << std::setw(10) << "N_train" << std::setw(14)
        << "err_hs_rel" << std::setw(14) << "err_op_rel" << std::setw(14) << "sampled_err" << std::setw(6) << "runs"
        << std::setw(6) << "fail" << '\n';
    out << std::setprecision(4);
    for (const MedianRow& m : table) {
        out << std::left << std::setw(10) << m.target << std::right << std::setw(10) << m.n_train << std::scientific
            << std::setw(14) << m.err_hs_rel << std::setw(14) << m.err_op_rel << std::setw(14) << m.sampled_err
            << std::defaultfloat << std::setw(6) << m.runs << std::setw(6) << m.failures << '\n';
    }
    out << budget_footer << '\n';
    return out.str();
}

TheoryFit fit_theory(const SweepResult& result) {
    TheoryFit fit;
    std::vector<double> gammas, offsets;
    for (const SweepRow& r : result.rows)
        if (usable(r) && std::isfinite(r.gamma_hat) && r.gamma_hat > 0.0) gammas.push_back(std::min(1.0, r.gamma_hat));
    fit.gamma = gammas.empty() ? 1.0 : median(gammas);
    for (const SweepRow& r : result.rows) {
        if (!usable(r) || r.n_train == 0 || !(r.err_hs_rel < std::exp(-1.0))) continue;
        offsets.push_back(std::log(static_cast<double>(r.n_train)) - std::log(n_theory(r.err_hs_rel, fit.gamma)));
    }
    fit.points = static_cast<int>(offsets.size());
    if (offsets.empty()) return fit;
    fit.c0 = std::exp(median(offsets));
    fit.valid = std::isfinite(fit.c0) && fit.c0 > 0.0;
    return fit;
}

std::string render_svg(const SweepResult& result) {
    constexpr double width = 760, height = 520, left = 80, right = 30, top = 40, bottom = 110;
    const double pw = width - left - right, ph = height - top - bottom;

    std::vector<const SweepRow*> rows;
    for (const SweepRow& r : result.rows)
        if (usable(r)) rows.push_back(&r);

    double xmin = 0, xmax = 1, ymin = -1, ymax = 0;
    if (!rows.empty()) {
        xmin = xmax = static_cast<double>(rows.front()->n_train);
        ymin = ymax = std::log10(rows.front()->err_hs_rel);
        for (const SweepRow* r : rows) {
            xmin = std::min(xmin, static_cast<double>(r->n_train));
            xmax = std::max(xmax, static_cast<double>(r->n_train));
            ymin = std::min(ymin, std::log10(r->err_hs_rel));
            ymax = std::max(ymax, std::log10(r->err_hs_rel));
        }
    }
    const double xpad = xmax > xmin ? 0.05 * (xmax - xmin) : std::max(1.0, 0.1 * xmax);
    xmin -= xpad;
    xmax += xpad;
    ymin = std::floor(ymin);
    ymax = std::ceil(ymax);
    if (ymax <= ymin) ymax = ymin + 1;

    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double log_e) { return top + (ymax - log_e) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << std::setprecision(6);
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e) {
        const double y = sy(e);
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + pw << "\" y2=\"" << y
            << "\" stroke=\"#dddddd\"/>\n"
            << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 5.0;
        svg << "<text x=\"" << sx(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
            << std::llround(xv) << "</text>\n";
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << top + ph + 38
        << "\" text-anchor=\"middle\">N_train (training solves)</text>\n"
        << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
        << top + ph / 2 << ")\">err_hs_rel</text>\n"
        << "<text x=\"" << left << "\" y=\"24\">err_hs_rel vs N_train (sweep over " << result.variable
        << ")</text>\n";

    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::map<std::uint64_t, std::vector<const SweepRow*>> by_seed;
    for (const SweepRow* r : rows) by_seed[r->seed].push_back(r);
    std::size_t series = 0;
    for (auto& [seed, pts] : by_seed) {
        std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->n_train < b->n_train; });
        const char* color = palette[series++ % 10];
        svg << "<g class=\"seed\" data-seed=\"" << seed << "\" stroke=\"" << color << "\" fill=\"" << color
            << "\">\n";
        if (pts.size() > 1) {
            svg << "<polyline fill=\"none\" stroke-width=\"1\" stroke-opacity=\"0.6\" points=\"";
            for (const SweepRow* r : pts)
                svg << sx(static_cast<double>(r->n_train)) << ',' << sy(std::log10(r->err_hs_rel)) << ' ';
            svg << "\"/>\n";
        }
        for (const SweepRow* r : pts)
            svg << "<circle cx=\"" << sx(static_cast<double>(r->n_train)) << "\" cy=\""
                << sy(std::log10(r->err_hs_rel)) << "\" r=\"3\"/>\n";
        svg << "</g>\n";
    }

    std::vector<std::pair<double, double>> med;
    for (const MedianRow& m : median_table(result))
        if (std::isfinite(m.n_train) && std::isfinite(m.err_hs_rel) && m.err_hs_rel > 0.0)
            med.emplace_back(m.n_train, m.err_hs_rel);
    std::sort(med.begin(), med.end());
    if (med.size() > 1) {
        svg << "<polyline class=\"median\" fill=\"none\" stroke=\"black\" stroke-width=\"2.5\" points=\"";
        for (auto [n, e] : med) svg << sx(n) << ',' << sy(std::log10(e)) << ' ';
        svg << "\"/>\n";
    }

    const TheoryFit fit = fit_theory(result);
    if (fit.valid) {
        std::ostringstream pts;
        int count = 0;
        const double hi = std::min(ymax, std::log10(std::exp(-1.0)) - 1e-6);
        for (int i = 0; i <= 200; ++i) {
            const double le = hi - (hi - ymin) * i / 200.0;
            const double n = fit.c0 * n_theory(std::pow(10.0, le), fit.gamma);
            if (n < xmin || n > xmax) continue;
            pts << sx(n) << ',' << sy(le) << ' ';
            ++count;
        }
        if (count > 1)
            svg << "<polyline class=\"theory\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1.5\" "
                   "stroke-dasharray=\"6,4\" points=\""
                << pts.str() << "\"/>\n";
    }

    double ly = top + ph + 58;
    svg << "<text x=\"" << left << "\" y=\"" << ly << "\">markers: one series per seed; solid black: median; "
        << "dashed: C0 * n_theory(err, gamma_hat)";
    if (fit.valid) svg << " with C0 = " << fit.c0 << ", gamma_hat = " << fit.gamma;
    else svg << " (not fitted: no error below 1/e)";
    svg << "</text>\n";
    // Wrap the footer over two lines.
    const std::string footer = budget_footer;
    const std::size_t cut = footer.find(". ") + 1;
    svg << "<text x=\"" << left << "\" y=\"" << ly + 18 << "\" font-size=\"10\">" << footer.substr(0, cut)
        << "</text>\n"
        << "<text x=\"" << left << "\" y=\"" << ly + 32 << "\" font-size=\"10\">" << footer.substr(cut + 1)
        << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

void write_svg(const std::filesystem::path& path, const SweepResult& result) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
    out << render_svg(result);
}

}  // namespace greenpeel
