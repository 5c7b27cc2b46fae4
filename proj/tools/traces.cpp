#include "traces.hpp"

#include <rlld/tensor_io.hpp>

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

namespace rlld::cli {

const std::vector<std::string>& trace_columns() {
    static const std::vector<std::string> columns = {
        "episode",       "step",          "branch",        "r1",           "r2",
        "r_inter",       "r_terminal",    "total",         "degenerate_count",
        "loss_video",    "loss_modality", "seg_audio",     "seg_visual",   "seg_av",
        "seg_type",      "seg_event",     "evt_audio",     "evt_visual",   "evt_av",
        "evt_type",      "evt_event",     "denoiser_update_norm",          "task_update_norm",
    };
    return columns;
}

void write_trace_header(std::ostream& out) {
    const auto& cols = trace_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
}

void write_trace_rows(std::ostream& out, const StepTrace& t) {
    auto row = [&](const char* branch, const RewardBundle& r) {
        const double values[] = {
            r.r1, r.r2, r.r_inter, r.r_terminal, r.total, static_cast<double>(t.degenerate_count),
            t.loss.video, t.loss.modality,
            t.segment.audio, t.segment.visual, t.segment.audiovisual, t.segment.type, t.segment.event,
            t.event.audio, t.event.visual, t.event.audiovisual, t.event.type, t.event.event,
            t.denoiser_update_norm, t.task_update_norm,
        };
        out << t.episode << ',' << t.step << ',' << branch;
        for (double v : values) out << ',' << format_double(v);
        out << '\n';
    };
    row("audio", t.audio);
    row("visual", t.visual);
}

std::size_t TraceTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return i;
    }
    throw Error(Error::Kind::missing_field, "traces have no column '" + name + "'");
}

TraceTable read_traces(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(Error::Kind::io, "cannot read " + file.string());
    TraceTable table;
    std::string line;
    if (!std::getline(in, line)) throw Error(Error::Kind::empty_dataset, file.string() + " is empty");
    {
        std::istringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) table.columns.push_back(cell);
    }
    const std::size_t branch_col = table.column("branch");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> values;
        std::string branch;
        std::size_t col = 0;
        std::size_t begin = 0;
        while (true) {
            const auto comma = line.find(',', begin);
            const std::string cell = line.substr(begin, comma == std::string::npos ? std::string::npos : comma - begin);
            if (col == branch_col) {
                branch = cell;
                values.push_back(0.0);
            } else {
                double v = 0.0;
                const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                    throw Error(Error::Kind::parse, file.string() + ":" + std::to_string(line_no) +
                                                        ": malformed value '" + cell + "'");
                }
                values.push_back(v);
            }
            ++col;
            if (comma == std::string::npos) break;
            begin = comma + 1;
        }
        if (values.size() != table.columns.size()) {
            throw Error(Error::Kind::parse, file.string() + ":" + std::to_string(line_no) + ": expected " +
                                                std::to_string(table.columns.size()) + " fields");
        }
        table.branch.push_back(std::move(branch));
        table.numeric.push_back(std::move(values));
    }
    if (table.rows() == 0) throw Error(Error::Kind::empty_dataset, file.string() + " has no trace rows");
    return table;
}

}  // namespace rlld::cli
