#pragma once

#include "traces.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rlld::cli {

inline constexpr double kCurveSmoothing = 0.1;

/// s_0 = x_0, s_k = factor * s_{k-1} + (1 - factor) * x_k.
std::vector<double> smooth(const std::vector<double>& values, double factor = kCurveSmoothing);

struct CurveSpec {
    std::string file_stem;  // e.g. "segment_audio"
    std::string column;     // traces.csv column
    std::string title;
};

/// The six convergence curves: {segment, event} x {audio, visual, Event@AV}.
const std::vector<CurveSpec>& curve_specs();

/// Per-episode mean of a validation column (audio-branch rows only).
std::vector<double> episode_series(const TraceTable& table, const std::string& column);

struct Band {
    std::vector<double> mean;  // across runs, of the smoothed per-run series
    std::vector<double> std;   // population standard deviation across runs
};

/// Runs are truncated to the shortest one.
Band band_of(const std::vector<std::vector<double>>& smoothed_runs);

std::string render_svg(const CurveSpec& spec, const Band& band, std::size_t runs);

/// Reads every run's traces.csv, then writes the six SVG curves plus
/// curves.csv into out_dir. Nothing is written if any input is invalid.
/// Returns the written paths.
std::vector<std::filesystem::path> plot_runs(const std::vector<std::filesystem::path>& run_dirs,
                                             const std::filesystem::path& out_dir);

}  // namespace rlld::cli
