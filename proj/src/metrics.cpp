#include "fal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fal/data.hpp"

namespace fal {

namespace {

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Series {
    std::string label;
    std::string color;
    std::vector<double> ys;
    bool dashed = false;
};

struct Panel {
    double left, top, width, height;
};

void draw_panel(std::ostringstream& os, const Panel& pn, const std::string& ylabel, std::span<const double> xs,
                const std::vector<Series>& series) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : series)
        for (double y : s.ys)
            if (std::isfinite(y)) {
                lo = std::min(lo, y);
                hi = std::max(hi, y);
            }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double xlo = xs.empty() ? 0.0 : xs.front();
    const double xhi = xs.empty() ? 1.0 : std::max(xs.back(), xlo + 1.0);
    auto px = [&](double x) { return pn.left + (x - xlo) / (xhi - xlo) * pn.width; };
    auto py = [&](double y) { return pn.top + pn.height - (y - lo) / (hi - lo) * pn.height; };

    os << "<rect x=\"" << fixed(pn.left) << "\" y=\"" << fixed(pn.top) << "\" width=\"" << fixed(pn.width)
       << "\" height=\"" << fixed(pn.height) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = lo + (hi - lo) * i / 4.0;
        const double xv = xlo + (xhi - xlo) * i / 4.0;
        os << "<text x=\"" << fixed(pn.left - 6) << "\" y=\"" << fixed(py(yv) + 4)
           << "\" font-size=\"11\" text-anchor=\"end\">" << fixed(yv, 3) << "</text>\n";
        os << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << fixed(pn.top + pn.height + 16)
           << "\" font-size=\"11\" text-anchor=\"middle\">" << fixed(xv, 0) << "</text>\n";
    }
    os << "<text x=\"" << fixed(pn.left + pn.width / 2) << "\" y=\"" << fixed(pn.top + pn.height + 32)
       << "\" font-size=\"12\" text-anchor=\"middle\">round</text>\n";
    os << "<text x=\"" << fixed(pn.left - 52) << "\" y=\"" << fixed(pn.top + pn.height / 2)
       << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 " << fixed(pn.left - 52) << ' '
       << fixed(pn.top + pn.height / 2) << ")\">" << escape(ylabel) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const Series& s = series[k];
        std::string pts;
        for (std::size_t i = 0; i < xs.size() && i < s.ys.size(); ++i) {
            if (!std::isfinite(s.ys[i])) continue;
            pts += fixed(px(xs[i])) + "," + fixed(py(s.ys[i])) + " ";
        }
        if (!pts.empty()) {
            pts.pop_back();
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
               << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"" << pts << "\"/>\n";
        }
        const double ly = pn.top + 14 + 16 * static_cast<double>(k);
        const double lx = pn.left + pn.width - 120;
        os << "<line x1=\"" << fixed(lx) << "\" y1=\"" << fixed(ly - 4) << "\" x2=\"" << fixed(lx + 20)
           << "\" y2=\"" << fixed(ly - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
           << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
        os << "<text x=\"" << fixed(lx + 26) << "\" y=\"" << fixed(ly) << "\" font-size=\"11\">" << escape(s.label)
           << "</text>\n";
    }
}

}  // namespace

std::string metrics_csv(std::span<const RoundRecord> records, bool with_audit) {
    std::ostringstream os;
    os << "round,adv_loss,clean_loss,train_acc,test_acc,dist_init_2inf,delta_u_fro";
    if (with_audit) os << ",fl_gap_21,coupling_gap_21,flip_count";
    os << '\n';
    for (const auto& r : records) {
        os << r.round << ',' << format_double(r.adv_loss) << ',' << format_double(r.clean_loss) << ','
           << format_double(r.train_acc) << ',' << format_double(r.test_acc) << ',' << format_double(r.dist_init_2inf)
           << ',' << format_double(r.delta_u_fro);
        if (with_audit) {
            if (r.grad)
                os << ',' << format_double(r.grad->fl_gap_21) << ',' << format_double(r.grad->coupling_gap_21) << ','
                   << r.grad->flip_count;
            else
                os << ",,,";
        }
        os << '\n';
    }
    return os.str();
}

std::string curves_svg(std::span<const RoundRecord> records, const std::string& title) {
    std::vector<double> xs;
    Series adv{"adversarial loss", "#1f77b4", {}};
    Series clean{"clean loss", "#ff7f0e", {}, true};
    Series train{"train accuracy", "#2ca02c", {}};
    Series test{"test accuracy", "#d62728", {}, true};
    for (const auto& r : records) {
        xs.push_back(static_cast<double>(r.round));
        adv.ys.push_back(r.adv_loss);
        clean.ys.push_back(r.clean_loss);
        train.ys.push_back(r.train_acc);
        test.ys.push_back(r.test_acc);
    }
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"640\" viewBox=\"0 0 720 640\">\n";
    os << "<rect width=\"720\" height=\"640\" fill=\"white\"/>\n";
    os << "<text x=\"360\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
    draw_panel(os, {90, 50, 590, 220}, "loss", xs, {adv, clean});
    draw_panel(os, {90, 360, 590, 220}, "accuracy", xs, {train, test});
    os << "</svg>\n";
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("error writing " + path.string());
}

}  // namespace fal
