#include "rlld/tensor_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace rlld {

std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) {
        throw Error(Error::Kind::io, "cannot format value");
    }
    return std::string(buf, end);
}

namespace {

template <typename Mat, typename Fmt>
void write_rows(const std::filesystem::path& path, const Mat& values, Fmt fmt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Error::Kind::io, "cannot open for writing: " + path.string());
    }
    std::string line;
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        line.clear();
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (c > 0) line.push_back(' ');
            line += fmt(values(r, c));
        }
        line.push_back('\n');
        out << line;
    }
    if (!out) {
        throw Error(Error::Kind::io, "write failed: " + path.string());
    }
}

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Error::Kind::io, "cannot open: " + path.string());
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<double> row;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            while (p < end && (*p == ' ' || *p == '\t' || *p == ',')) ++p;
            if (p == end) break;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{}) {
                // from_chars rejects "nan"/"inf" spellings with a sign prefix on some
                // libraries; fall back to strtod so non-finite values reach the check.
                char* stop = nullptr;
                std::string token(p, std::find_if(p, end, [](char ch) {
                    return ch == ' ' || ch == '\t' || ch == ',';
                }));
                v = std::strtod(token.c_str(), &stop);
                if (stop == token.c_str()) {
                    throw Error(Error::Kind::parse, path.string() + ":" + std::to_string(line_no) +
                                                        ": unparsable entry '" + token + "'");
                }
                next = p + token.size();
            }
            if (!std::isfinite(v)) {
                throw Error(Error::Kind::numerical,
                            "non-finite value in " + path.string() + " line " + std::to_string(line_no));
            }
            row.push_back(v);
            p = next;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw Error(Error::Kind::parse, path.string() + ":" + std::to_string(line_no) + ": ragged row");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void write_matrix_text(const std::filesystem::path& path, const Matrix& values) {
    write_rows(path, values, [](double v) { return format_double(v); });
}

void write_binary_matrix_text(const std::filesystem::path& path, const BinaryMatrix& values) {
    write_rows(path, values, [](int v) { return std::string(v != 0 ? "1" : "0"); });
}

Matrix read_matrix_text(const std::filesystem::path& path) {
    auto rows = read_rows(path);
    if (rows.empty()) {
        return Matrix(0, 0);
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

BinaryMatrix read_binary_matrix_text(const std::filesystem::path& path) {
    Matrix m = read_matrix_text(path);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double v = m.data()[i];
        if (v != 0.0 && v != 1.0) {
            throw Error(Error::Kind::parse, "non-binary entry in " + path.string());
        }
    }
    return m.cast<int>();
}

}  // namespace rlld
