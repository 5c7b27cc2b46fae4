#pragma once

#include <rlld/trainer.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace rlld::cli {

/// Column order of traces.csv. Each training step contributes two rows, one
/// per denoising branch; the loss, validation and update-norm columns repeat.
const std::vector<std::string>& trace_columns();

void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, const StepTrace& trace);

struct TraceTable {
    std::vector<std::string> columns;
    std::vector<std::string> branch;            // per row
    std::vector<std::vector<double>> numeric;   // per row, columns other than branch (branch slot holds 0)

    std::size_t column(const std::string& name) const;
    std::size_t rows() const { return branch.size(); }
};

/// Throws Error(parse) on a malformed file and Error(empty_dataset) when it has no rows.
TraceTable read_traces(const std::filesystem::path& file);

}  // namespace rlld::cli
