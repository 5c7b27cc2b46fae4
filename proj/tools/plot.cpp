#include "plot.hpp"

#include <rlld/tensor_io.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace rlld::cli {

namespace fs = std::filesystem;

std::vector<double> smooth(const std::vector<double>& values, double factor) {
    std::vector<double> out;
    out.reserve(values.size());
    for (double x : values) out.push_back(out.empty() ? x : factor * out.back() + (1.0 - factor) * x);
    return out;
}

const std::vector<CurveSpec>& curve_specs() {
    static const std::vector<CurveSpec> specs = {
        {"segment_audio", "seg_audio", "Segment-level audio F-score"},
        {"segment_visual", "seg_visual", "Segment-level visual F-score"},
        {"segment_event_av", "seg_event", "Segment-level Event@AV"},
        {"event_audio", "evt_audio", "Event-level audio F-score"},
        {"event_visual", "evt_visual", "Event-level visual F-score"},
        {"event_event_av", "evt_event", "Event-level Event@AV"},
    };
    return specs;
}

std::vector<double> episode_series(const TraceTable& table, const std::string& column) {
    const std::size_t ep = table.column("episode");
    const std::size_t col = table.column(column);
    std::map<long, std::pair<double, int>> sums;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        if (table.branch[r] != "audio") continue;
        auto& [sum, count] = sums[std::lround(table.numeric[r][ep])];
        sum += table.numeric[r][col];
        ++count;
    }
    std::vector<double> out;
    out.reserve(sums.size());
    for (const auto& [episode, acc] : sums) out.push_back(acc.first / acc.second);
    return out;
}

Band band_of(const std::vector<std::vector<double>>& runs) {
    Band band;
    if (runs.empty()) return band;
    std::size_t len = runs.front().size();
    for (const auto& r : runs) len = std::min(len, r.size());
    const double n = static_cast<double>(runs.size());
    for (std::size_t k = 0; k < len; ++k) {
        double mean = 0.0;
        for (const auto& r : runs) mean += r[k];
        mean /= n;
        double var = 0.0;
        for (const auto& r : runs) var += (r[k] - mean) * (r[k] - mean);
        band.mean.push_back(mean);
        band.std.push_back(std::sqrt(var / n));
    }
    return band;
}

std::string render_svg(const CurveSpec& spec, const Band& band, std::size_t runs) {
    constexpr double width = 640, height = 400, left = 60, right = 20, top = 40, bottom = 50;
    const double pw = width - left - right;
    const double ph = height - top - bottom;
    double lo = 1.0, hi = 0.0;
    for (std::size_t k = 0; k < band.mean.size(); ++k) {
        lo = std::min(lo, band.mean[k] - band.std[k]);
        hi = std::max(hi, band.mean[k] + band.std[k]);
    }
    if (!(hi > lo)) {
        lo -= 0.05;
        hi += 0.05;
    }
    const double pad = 0.05 * (hi - lo);
    lo = std::max(0.0, lo - pad);
    hi = std::min(1.0, hi + pad);
    if (!(hi > lo)) hi = lo + 1e-3;
    const std::size_t n = band.mean.size();
    auto x_of = [&](std::size_t k) { return left + (n > 1 ? pw * static_cast<double>(k) / static_cast<double>(n - 1) : pw / 2); };
    auto y_of = [&](double v) { return top + ph * (1.0 - (v - lo) / (hi - lo)); };

    std::ostringstream svg;
    svg.setf(std::ios::fixed);
    svg.precision(2);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
        << spec.title << " (" << runs << (runs == 1 ? " run" : " runs") << ", smoothing " << kCurveSmoothing
        << ")</text>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = lo + (hi - lo) * i / 4.0;
        svg << "<text x=\"" << left - 6 << "\" y=\"" << y_of(v) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << std::setprecision(3) << v
            << "</text>\n" << std::setprecision(2);
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">episode (1.." << n << ")</text>\n";
    if (runs > 1 && n > 0) {
        svg << "<polygon fill=\"steelblue\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
        for (std::size_t k = 0; k < n; ++k) svg << x_of(k) << ',' << y_of(band.mean[k] + band.std[k]) << ' ';
        for (std::size_t k = n; k-- > 0;) svg << x_of(k) << ',' << y_of(band.mean[k] - band.std[k]) << ' ';
        svg << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < n; ++k) svg << x_of(k) << ',' << y_of(band.mean[k]) << ' ';
    svg << "\"/>\n</svg>\n";
    return svg.str();
}

std::vector<fs::path> plot_runs(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
    if (run_dirs.empty()) throw Error(Error::Kind::invalid_config, "plot: no run directories given");
    std::vector<TraceTable> tables;
    for (const fs::path& dir : run_dirs) {
        const fs::path file = fs::is_regular_file(dir) ? dir : dir / "traces.csv";
        tables.push_back(read_traces(file));
    }

    std::vector<std::pair<CurveSpec, Band>> curves;
    for (const CurveSpec& spec : curve_specs()) {
        std::vector<std::vector<double>> runs;
        for (const TraceTable& t : tables) runs.push_back(smooth(episode_series(t, spec.column)));
        curves.emplace_back(spec, band_of(runs));
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw Error(Error::Kind::io, "cannot create plot directory " + out_dir.string());
    std::vector<fs::path> written;
    std::ofstream table(out_dir / "curves.csv", std::ios::binary);
    table << "curve,episode,mean,std,runs\n";
    for (const auto& [spec, band] : curves) {
        const fs::path file = out_dir / (spec.file_stem + ".svg");
        std::ofstream out(file, std::ios::binary);
        out << render_svg(spec, band, tables.size());
        if (!out) throw Error(Error::Kind::io, "cannot write " + file.string());
        written.push_back(file);
        for (std::size_t k = 0; k < band.mean.size(); ++k) {
            table << spec.file_stem << ',' << k + 1 << ',' << format_double(band.mean[k]) << ','
                  << format_double(band.std[k]) << ',' << tables.size() << '\n';
        }
    }
    if (!table) throw Error(Error::Kind::io, "cannot write " + (out_dir / "curves.csv").string());
    written.push_back(out_dir / "curves.csv");
    return written;
}

}  // namespace rlld::cli
